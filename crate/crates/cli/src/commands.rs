use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use wf_intertwine::analytics::{
    absorption_mean, explosion_mean, explosion_variance, ks_critical_value, ks_statistic, AbsorptionLaw,
    DEFAULT_N_TRUNC,
};
use wf_intertwine::intertwine::{
    default_sample_points, verify_gk_kh, verify_lambda_intertwining, verify_psi_intertwining, verify_pt_approximation,
    verify_pt_k_k_qt, ApproximationReport, VerificationReport, VerifyOptions,
};
use wf_intertwine::kernels::{phi_lift, psi_lift};
use wf_intertwine::poly::DEFAULT_EXPM_TOL;
use wf_intertwine::sim::{
    birth_ensemble, check_averaging, check_moments, coupled_ensemble, drift_sign_check, wf_ensemble, Executor, Sample,
    SimConfig, SubstepRule, TrajectoryRecord,
};
use wf_intertwine::{Arithmetic, BirthRates, EvenPolynomial, LatticeFunction, Level};

use crate::error::CliError;
use crate::manifest::{timestamp, OutputDir, RunManifest, MANIFEST_FILE};
use crate::settings::Settings;

/// Residual threshold of the float-only checks when the suite runs in exact mode.
const EXACT_MODE_FLOAT_TOL: f64 = 1e-10;

pub const VERIFY_DEFAULTS: &[(&str, &str)] = &[
    ("n-max", "12"),
    ("y0-max", "12"),
    ("t", "0.01,0.1,1"),
    ("mode", "exact"),
    ("tol", "1e-12"),
    ("perturb-rate", ""),
];

pub const SIMULATE_DEFAULTS: &[(&str, &str)] = &[
    ("kind", "coupled"),
    ("x0", "0"),
    ("y-start", "0"),
    ("paths", "10000"),
    ("dt", "1e-4"),
    ("eps-boundary", "1e-4"),
    ("t-max", "1"),
    ("record-dt", "0.05"),
    ("level-cap", "256"),
    ("executor", "parallel"),
];

pub const ANALYZE_DEFAULTS: &[(&str, &str)] = &[
    ("task", ""),
    ("input", ""),
    ("t", ""),
    ("tv-max", "0.02"),
    ("ks-max", "0.03"),
    ("moment-slack", "0.005"),
    ("x0", "0.5"),
    ("paths", "20000"),
    ("dt", "1e-4"),
    ("t-max", "5"),
    ("level-cap", "32"),
    ("levels", "4"),
    ("executor", "parallel"),
];

/// What a command produced: pass/fail and the JSON report printed to stdout.
pub struct Outcome {
    pub pass: bool,
    pub report: serde_json::Value,
    /// First failing item, printed to stderr on failure.
    pub first_failure: Option<serde_json::Value>,
}

fn executor(s: &Settings) -> Result<Executor, CliError> {
    match s.raw("executor")? {
        "parallel" => Ok(Executor::Parallel),
        "sequential" => Ok(Executor::Sequential),
        other => Err(CliError::Usage(format!("executor must be parallel or sequential, got {other:?}"))),
    }
}

fn sim_config(s: &Settings, t_max: f64) -> Result<SimConfig, CliError> {
    let dt: f64 = s.get("dt")?;
    let cfg = SimConfig {
        dt_base: dt,
        boundary_eps: s.get_opt("eps-boundary").ok().flatten().unwrap_or(1e-4),
        substep: SubstepRule { dt_min: SubstepRule::default().dt_min.min(dt), ..Default::default() },
        t_max,
        n_paths: s.get("paths")?,
        master_seed: s.get("seed")?,
        level_cap: s.get("level-cap")?,
        record_jumps: false,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("reports serialize")
}

// ---------------------------------------------------------------- verify

fn parse_perturbation(raw: &str) -> Result<BirthRates, CliError> {
    if raw.is_empty() {
        return Ok(BirthRates::standard());
    }
    let (y, rate) =
        raw.split_once(':').ok_or_else(|| CliError::Usage(format!("perturb-rate must be LEVEL:RATE, got {raw:?}")))?;
    let parse = |v: &str| v.trim().parse::<u64>().map_err(|e| CliError::Usage(format!("perturb-rate: {e}")));
    Ok(BirthRates::standard().with_override(parse(y)?, parse(rate)?))
}

#[derive(Serialize)]
struct VerifySuite {
    mode: Arithmetic,
    rates_perturbed: bool,
    pass: bool,
    identities: Vec<VerificationReport>,
    approximation: Vec<ApproximationReport>,
}

pub fn verify(s: &Settings) -> Result<Outcome, CliError> {
    let n_max: usize = s.get("n-max")?;
    let y0_max: usize = s.get("y0-max")?;
    let ts: Vec<f64> = s.get_list("t")?;
    if ts.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(CliError::Usage("times must be finite and >= 0".into()));
    }
    let mode = match s.raw("mode")? {
        "exact" => Arithmetic::Exact,
        "float" => Arithmetic::Float,
        other => return Err(CliError::Usage(format!("mode must be exact or float, got {other:?}"))),
    };
    let rates = parse_perturbation(s.raw("perturb-rate")?)?;
    // exact mode never reads the tolerance flag
    let float_tol = match mode {
        Arithmetic::Exact => EXACT_MODE_FLOAT_TOL,
        Arithmetic::Float => s.get("tol")?,
    };
    let opts = VerifyOptions { mode, tol: float_tol, expm_tol: DEFAULT_EXPM_TOL, rates: rates.clone() };
    let float_opts = VerifyOptions { mode: Arithmetic::Float, ..opts.clone() };

    let mut identities = Vec::new();
    identities.extend((0..=y0_max).map(|y0| verify_gk_kh(y0, &opts)));
    for &t in &ts {
        identities.push(verify_pt_k_k_qt(t, y0_max, &float_opts)?);
    }
    identities.extend((0..=n_max).map(|n| verify_lambda_intertwining(n, &opts)));
    identities.extend((0..=y0_max).map(|y0| verify_psi_intertwining(y0, &opts)));

    let approx_ts = [1e-2, 10f64.powf(-2.5), 1e-3];
    let cases = [
        ("Ψ1{0}", psi_lift(&LatticeFunction::indicator(0, 0), 0)),
        ("Φx²", phi_lift(&EvenPolynomial::monomial(1, 1), 4).truncate_to_domain()),
    ];
    let approximation = cases
        .iter()
        .map(|(label, f)| {
            verify_pt_approximation(label, f, &approx_ts, &default_sample_points(), &rates, DEFAULT_EXPM_TOL)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let first_failure =
        identities.iter().find(|r| !r.pass).map(json).or_else(|| approximation.iter().find(|r| !r.pass).map(json));
    let suite = VerifySuite {
        mode,
        rates_perturbed: !rates.is_standard(),
        pass: first_failure.is_none(),
        identities,
        approximation,
    };
    Ok(Outcome { pass: suite.pass, report: json(&suite), first_failure })
}

// ---------------------------------------------------------------- simulate

fn level_str(y: Level) -> String {
    match y {
        Level::Finite(y) => y.to_string(),
        Level::Infinite => "inf".into(),
    }
}

fn trajectories_csv(records: &[TrajectoryRecord]) -> String {
    let mut out = String::from("path_id,t,x,y\n");
    for r in records {
        for s in &r.samples {
            writeln!(out, "{},{},{},{}", r.stream_id, s.t, s.x, level_str(s.y)).expect("string write");
        }
    }
    out
}

fn times_csv(rows: impl Iterator<Item = (u64, f64)>) -> String {
    let mut out = String::from("path_id,time\n");
    for (id, t) in rows {
        writeln!(out, "{id},{t}").expect("string write");
    }
    out
}

fn sample_grid(t_max: f64, record_dt: Option<f64>) -> Result<Vec<f64>, CliError> {
    match record_dt {
        None => Ok(Vec::new()),
        Some(dt) if dt > 0.0 => {
            let k = (t_max / dt + 1e-9).floor() as usize;
            Ok((0..=k).map(|i| i as f64 * dt).collect())
        }
        Some(dt) => Err(CliError::Usage(format!("record-dt must be > 0, got {dt}"))),
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var)
}

pub fn simulate(s: &Settings, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let kind = s.raw("kind")?.to_owned();
    let t_max: f64 = s.get("t-max")?;
    let cfg = sim_config(s, t_max)?;
    let exec = executor(s)?;
    let x0: f64 = s.get("x0")?;
    if !(0.0..=1.0).contains(&x0) {
        return Err(CliError::Usage(format!("x0 must lie in [0, 1], got {x0}")));
    }
    let grid = sample_grid(t_max, s.get_opt("record-dt")?)?;
    let summary = match kind.as_str() {
        "birth" => {
            let start: u64 = s.get("y-start")?;
            let times = birth_ensemble(start, &cfg, exec)?;
            out.write(
                "explosion.csv",
                times_csv(times.iter().copied().enumerate().map(|(i, t)| (i as u64, t))).as_bytes(),
            )?;
            let (mean, var) = mean_var(&times);
            json!({
                "kind": kind,
                "y_start": start,
                "paths": times.len(),
                "mean": mean,
                "mean_se": (var / times.len() as f64).sqrt(),
                "variance": var,
                "analytic_mean": explosion_mean(start),
                "analytic_variance": explosion_variance(start),
            })
        }
        "wf" | "coupled" => {
            let records = if kind == "wf" {
                wf_ensemble(x0, &cfg, &grid, exec)?
            } else {
                coupled_ensemble(x0, &cfg, &grid, exec)?
            };
            if !grid.is_empty() {
                out.write("trajectories.csv", trajectories_csv(&records).as_bytes())?;
            }
            let absorbed: Vec<(u64, f64)> =
                records.iter().filter_map(|r| r.absorption_time.map(|t| (r.stream_id, t))).collect();
            out.write("absorption.csv", times_csv(absorbed.iter().copied()).as_bytes())?;
            let steps: u64 = records.iter().map(|r| r.steps).sum();
            json!({
                "kind": kind,
                "x0": x0,
                "paths": records.len(),
                "absorbed_within_horizon": absorbed.len(),
                "t_max": t_max,
                "analytic_mean_absorption_time": absorption_mean(x0)?,
                "euler_steps": steps,
            })
        }
        other => return Err(CliError::Usage(format!("kind must be coupled, wf or birth, got {other:?}"))),
    };
    out.write_json("summary.json", &summary)?;
    Ok(Outcome { pass: true, report: summary, first_failure: None })
}

// ---------------------------------------------------------------- analyze

struct Input {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Input {
    fn open(s: &Settings) -> Result<Self, CliError> {
        let raw = s.raw("input")?;
        if raw.is_empty() {
            return Err(CliError::Usage("this task needs --input DIR from a simulate run".into()));
        }
        let dir = PathBuf::from(raw);
        let manifest = RunManifest::load(&dir.join(MANIFEST_FILE))?;
        if manifest.subcommand != "simulate" {
            return Err(CliError::Usage(format!("{} is not a simulate output", dir.display())));
        }
        Ok(Input { dir, manifest })
    }

    fn setting(&self, key: &str) -> Result<&str, CliError> {
        self.manifest
            .settings
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| CliError::Usage(format!("input manifest lacks {key:?}")))
    }

    fn x0(&self) -> Result<f64, CliError> {
        self.setting("x0")?.parse().map_err(|e| CliError::Usage(format!("input manifest x0: {e}")))
    }

    fn reader(&self, name: &str) -> Result<csv::Reader<std::fs::File>, CliError> {
        let path = self.dir.join(name);
        csv::Reader::from_path(&path).map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))
    }

    fn trajectories(&self) -> Result<Vec<TrajectoryRecord>, CliError> {
        let x0 = self.x0()?;
        let mut by_path: BTreeMap<u64, TrajectoryRecord> = BTreeMap::new();
        for row in self.reader("trajectories.csv")?.deserialize() {
            let (id, t, x, y): (u64, f64, f64, String) = row?;
            let y = match y.as_str() {
                "inf" => Level::Infinite,
                v => Level::Finite(v.parse().map_err(|e| CliError::Usage(format!("malformed level {v:?}: {e}")))?),
            };
            by_path
                .entry(id)
                .or_insert_with(|| TrajectoryRecord {
                    stream_id: id,
                    x0,
                    samples: Vec::new(),
                    jump_times: Vec::new(),
                    explosion_time: None,
                    absorption_time: None,
                    steps: 0,
                })
                .samples
                .push(Sample { t, x, y });
        }
        if by_path.is_empty() {
            return Err(CliError::Usage("trajectories.csv has no rows".into()));
        }
        Ok(by_path.into_values().collect())
    }

    fn absorption_times(&self) -> Result<Vec<f64>, CliError> {
        self.reader("absorption.csv")?
            .deserialize()
            .map(|row| row.map(|(_, t): (u64, f64)| t).map_err(CliError::from))
            .collect()
    }
}

/// Requested times, matched to the sample times present in the records.
fn analysis_times(s: &Settings, records: &[TrajectoryRecord]) -> Result<Vec<f64>, CliError> {
    let available: Vec<f64> = records[0].samples.iter().map(|p| p.t).collect();
    let requested: Vec<f64> = s.get_list("t")?;
    if requested.is_empty() {
        return Ok(available);
    }
    requested
        .iter()
        .map(|&t| {
            available
                .iter()
                .copied()
                .find(|a| (a - t).abs() <= 1e-9 * t.abs().max(1.0))
                .ok_or_else(|| CliError::Usage(format!("no samples at t={t}; recorded times are {available:?}")))
        })
        .collect()
}

pub fn analyze(s: &Settings, out: Option<&mut OutputDir>) -> Result<Outcome, CliError> {
    let task = s.raw("task")?.to_owned();
    let (pass, report) = match task.as_str() {
        "averaging" => {
            let input = Input::open(s)?;
            if input.setting("kind")? != "coupled" {
                return Err(CliError::Usage("averaging needs a coupled simulation".into()));
            }
            let records = input.trajectories()?;
            let ts = analysis_times(s, &records)?;
            let rep = check_averaging(&records, input.x0()?, &ts)?;
            let tv_max: f64 = s.get("tv-max")?;
            let pass = rep.max_tv() <= tv_max && rep.p0_max_z() <= 3.0;
            (pass, json!({ "task": task, "tv_max": tv_max, "pass": pass, "report": rep }))
        }
        "moments" => {
            let input = Input::open(s)?;
            let records = input.trajectories()?;
            let ts = analysis_times(s, &records)?;
            let rep = check_moments(&records, input.x0()?, &ts)?;
            let slack: f64 = s.get("moment-slack")?;
            let pass = rep.within(3.0, slack);
            (pass, json!({ "task": task, "z": 3.0, "slack": slack, "pass": pass, "report": rep }))
        }
        "absorption-ks" => {
            let input = Input::open(s)?;
            let x0 = input.x0()?;
            let paths: usize =
                input.setting("paths")?.parse().map_err(|e| CliError::Usage(format!("input manifest paths: {e}")))?;
            let times = input.absorption_times()?;
            if times.len() != paths {
                return Err(CliError::Usage(format!(
                    "{} of {paths} paths were not absorbed within the horizon; rerun with a larger t-max",
                    paths - times.len()
                )));
            }
            let horizon = times.iter().copied().fold(0.0, f64::max).max(1e-3);
            let law = AbsorptionLaw::new(x0, DEFAULT_N_TRUNC, horizon, 1e-4)?;
            let d = ks_statistic(&times, |t| law.bounds(t))?;
            let ks_max: f64 = s.get("ks-max")?;
            if let Some(out) = out {
                let mut table = String::from("t,lower,upper\n");
                for (t, lo, hi) in law.table(horizon, 1001) {
                    writeln!(table, "{t},{lo},{hi}").expect("string write");
                }
                out.write("cdf_bounds.csv", table.as_bytes())?;
            }
            let pass = d <= ks_max;
            (
                pass,
                json!({
                    "task": task,
                    "x0": x0,
                    "samples": times.len(),
                    "ks_distance": d,
                    "ks_max": ks_max,
                    "critical_value_1pct": ks_critical_value(times.len()),
                    "pass": pass,
                }),
            )
        }
        "drift-sign" => {
            let t_max: f64 = s.get("t-max")?;
            let cfg = sim_config(s, t_max)?;
            let rep = drift_sign_check(s.get("x0")?, &cfg, s.get("levels")?, executor(s)?)?;
            (rep.pass, json!({ "task": task, "pass": rep.pass, "report": rep }))
        }
        "" => return Err(CliError::Usage("analyze needs --task".into())),
        other => {
            return Err(CliError::Usage(format!(
                "task must be averaging, absorption-ks, moments or drift-sign, got {other:?}"
            )))
        }
    };
    Ok(Outcome { pass, report, first_failure: None })
}

/// Runs `subcommand` with resolved settings, writing outputs and a manifest to
/// `out` when given.
pub fn run(subcommand: &str, s: &Settings, out_dir: Option<&Path>) -> Result<(Outcome, Option<RunManifest>), CliError> {
    let started = timestamp();
    let mut out = out_dir.map(OutputDir::create).transpose()?;
    let outcome = match subcommand {
        "verify" => verify(s)?,
        "simulate" => {
            let out = out.as_mut().ok_or_else(|| CliError::Usage("simulate needs --out DIR".into()))?;
            simulate(s, out)?
        }
        "analyze" => analyze(s, out.as_mut())?,
        other => return Err(CliError::Usage(format!("unknown subcommand {other:?}"))),
    };
    let manifest = match out {
        Some(mut out) => {
            if subcommand != "simulate" {
                out.write_json(&format!("{subcommand}.json"), &outcome.report)?;
            }
            Some(out.finish(subcommand, s, started)?)
        }
        None => None,
    };
    Ok((outcome, manifest))
}
