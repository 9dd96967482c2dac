//! `wf-intertwine`: verification suites, simulations and analyses with
//! reproducible manifests.
//!
//! Exit status: 0 pass, 1 verification failure, 2 usage error, 3 numeric or I/O failure.

mod commands;
mod error;
mod manifest;
mod settings;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Outcome, ANALYZE_DEFAULTS, SIMULATE_DEFAULTS, VERIFY_DEFAULTS};
use error::CliError;
use manifest::{RunManifest, MANIFEST_FILE};
use settings::Settings;

#[derive(Parser)]
#[command(name = "wf-intertwine", version, about = "Wright-Fisher / birth-process intertwining toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the intertwining identities and the short-time approximation.
    Verify(VerifyArgs),
    /// Simulate birth, diffusion or coupled paths into an output directory.
    Simulate(SimulateArgs),
    /// Compute statistics from simulation outputs.
    Analyze(AnalyzeArgs),
    /// Re-run a manifest and compare every output digest.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct Shared {
    /// Flat key=value settings file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (reports, CSV files and a manifest).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    y0_max: Option<usize>,
    /// Comma-separated times for the semigroup identity.
    #[arg(long)]
    t: Option<String>,
    /// exact or float.
    #[arg(long)]
    mode: Option<String>,
    /// Residual threshold in float mode; exact mode ignores it.
    #[arg(long)]
    tol: Option<f64>,
    /// LEVEL:RATE replaces one birth rate (negative control).
    #[arg(long, hide = true)]
    perturb_rate: Option<String>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct SimulateArgs {
    /// coupled, wf or birth.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    x0: Option<f64>,
    /// Start level of birth runs.
    #[arg(long)]
    y_start: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    eps_boundary: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    /// Spacing of recorded trajectory samples; empty disables trajectories.csv.
    #[arg(long)]
    record_dt: Option<String>,
    #[arg(long)]
    level_cap: Option<u64>,
    /// parallel or sequential (outputs are identical).
    #[arg(long)]
    executor: Option<String>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// averaging, absorption-ks, moments or drift-sign.
    #[arg(long)]
    task: Option<String>,
    /// Output directory of a simulate run.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated sample times (default: all recorded).
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    tv_max: Option<f64>,
    #[arg(long)]
    ks_max: Option<f64>,
    /// Start point of drift-sign runs.
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    level_cap: Option<u64>,
    /// Number of levels tested by drift-sign.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    executor: Option<String>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct ReplayArgs {
    /// A manifest.json, or the directory holding it.
    manifest: PathBuf,
    /// Where to write the replayed outputs (default: replay/ next to the manifest).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn s<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(T::to_string)
}

fn path(v: &Option<PathBuf>) -> Option<String> {
    v.as_ref().map(|p| p.display().to_string())
}

/// Prints to stdout; a closed pipe (e.g. `| head`) is not an error.
fn print_json(value: &serde_json::Value) -> Result<(), CliError> {
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{}", serde_json::to_string_pretty(value)?) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn report(outcome: &Outcome) -> Result<(), CliError> {
    print_json(&outcome.report)?;
    if let Some(f) = &outcome.first_failure {
        eprintln!("first failure: {}", serde_json::to_string(f)?);
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let (name, settings, out) = match &cli.command {
        Command::Verify(a) => {
            let flags = vec![
                ("n-max", s(&a.n_max)),
                ("y0-max", s(&a.y0_max)),
                ("t", a.t.clone()),
                ("mode", a.mode.clone()),
                ("tol", s(&a.tol)),
                ("perturb-rate", a.perturb_rate.clone()),
            ];
            let settings = Settings::resolve(VERIFY_DEFAULTS, a.shared.config.as_deref(), flags, false)?;
            ("verify", settings, a.shared.out.clone())
        }
        Command::Simulate(a) => {
            let flags = vec![
                ("kind", a.kind.clone()),
                ("x0", s(&a.x0)),
                ("y-start", s(&a.y_start)),
                ("paths", s(&a.paths)),
                ("seed", s(&a.seed)),
                ("dt", s(&a.dt)),
                ("eps-boundary", s(&a.eps_boundary)),
                ("t-max", s(&a.t_max)),
                ("record-dt", a.record_dt.clone()),
                ("level-cap", s(&a.level_cap)),
                ("executor", a.executor.clone()),
            ];
            let settings = Settings::resolve(SIMULATE_DEFAULTS, a.shared.config.as_deref(), flags, true)?;
            ("simulate", settings, a.shared.out.clone())
        }
        Command::Analyze(a) => {
            let flags = vec![
                ("task", a.task.clone()),
                ("input", path(&a.input)),
                ("t", a.t.clone()),
                ("tv-max", s(&a.tv_max)),
                ("ks-max", s(&a.ks_max)),
                ("x0", s(&a.x0)),
                ("paths", s(&a.paths)),
                ("seed", s(&a.seed)),
                ("dt", s(&a.dt)),
                ("t-max", s(&a.t_max)),
                ("level-cap", s(&a.level_cap)),
                ("levels", s(&a.levels)),
                ("executor", a.executor.clone()),
            ];
            let settings = Settings::resolve(ANALYZE_DEFAULTS, a.shared.config.as_deref(), flags, true)?;
            ("analyze", settings, a.shared.out.clone())
        }
        Command::Replay(a) => return replay(a),
    };
    let (outcome, _) = commands::run(name, &settings, out.as_deref())?;
    report(&outcome)?;
    Ok(outcome.pass)
}

fn replay(a: &ReplayArgs) -> Result<bool, CliError> {
    let file = if a.manifest.is_dir() { a.manifest.join(MANIFEST_FILE) } else { a.manifest.clone() };
    let original = RunManifest::load(&file)?;
    let out = match &a.out {
        Some(o) => o.clone(),
        None => file.parent().unwrap_or(std::path::Path::new(".")).join("replay"),
    };
    let settings = Settings::from_map(original.settings.clone());
    let (_, manifest) = commands::run(&original.subcommand, &settings, Some(&out))?;
    let replayed = manifest.expect("replay always writes outputs");
    let mut mismatches = Vec::new();
    for (name, digest) in &original.outputs {
        if replayed.outputs.get(name) != Some(digest) {
            mismatches.push(name.clone());
        }
    }
    for name in replayed.outputs.keys() {
        if !original.outputs.contains_key(name) {
            mismatches.push(name.clone());
        }
    }
    let result = serde_json::json!({
        "manifest": file.display().to_string(),
        "replay_dir": out.display().to_string(),
        "files": original.outputs.len(),
        "identical": mismatches.is_empty(),
        "mismatched": mismatches,
    });
    print_json(&result)?;
    Ok(mismatches.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
