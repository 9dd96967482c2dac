//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, then a nonzero
//! exit status if anything failed.
//!
//! Run with `cargo test -p wf-intertwine --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wf_intertwine::analytics::{
    explosion_mean, explosion_variance, ks_critical_value, ks_statistic, ks_two_sample, ks_two_sample_critical_value,
    AbsorptionLaw, DEFAULT_N_TRUNC,
};
use wf_intertwine::intertwine::{
    default_sample_points, positive_maximum_check, verify_gk_kh, verify_lambda_intertwining, verify_psi_intertwining,
    verify_pt_approximation, verify_pt_k_k_qt, VerifyOptions,
};
use wf_intertwine::kernels::{phi_lift, psi_lift};
use wf_intertwine::poly::DEFAULT_EXPM_TOL;
use wf_intertwine::sim::{
    birth_ensemble, birth_mixture_ensemble, check_averaging, check_moments, coupled_ensemble, drift_sign_check,
    wf_ensemble, Executor, SimConfig,
};
use wf_intertwine::{BirthRates, EvenPolynomial, LatticeFunction};

const SEED: u64 = 0x00ac_ce97;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn intertwining_exact_and_float() -> Outcome {
    let start = Instant::now();
    let exact_ok = (0..=12).all(|y0| verify_gk_kh(y0, &VerifyOptions::default()).pass);
    let float = (0..=20).map(|y0| verify_gk_kh(y0, &VerifyOptions::float(1e-12)).max_abs_residual).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        exact_ok && float <= 1e-12 && secs < 1.0,
        format!(
            "exact zero for y0<=12: {exact_ok}; float max residual {float:.2e} <= 1e-12 for y0<=20; {secs:.3}s < 1s"
        ),
    )
}

fn semigroup_intertwining() -> Outcome {
    let mut worst = 0.0f64;
    for &t in &[0.01, 0.1, 1.0] {
        match verify_pt_k_k_qt(t, 12, &VerifyOptions::float(1e-10)) {
            Ok(r) => worst = worst.max(r.max_abs_residual),
            Err(e) => return outcome(false, format!("t={t}: {e}")),
        }
    }
    outcome(worst <= 1e-10, format!("max |P_t K - K Q_t| over t in {{0.01, 0.1, 1}}, y0=12: {worst:.2e} <= 1e-10"))
}

fn lifted_intertwinings() -> Outcome {
    let lambda = (0..=8).all(|n| verify_lambda_intertwining(n, &VerifyOptions::default()).pass);
    let psi = (0..=8).all(|y0| verify_psi_intertwining(y0, &VerifyOptions::default()).pass);
    outcome(lambda && psi, format!("Λ exact for n<=8: {lambda}; Ψ exact for y0<=8: {psi}"))
}

fn short_time_approximation() -> Outcome {
    let ts = [1e-2, 10f64.powf(-2.5), 1e-3];
    let rates = BirthRates::standard();
    let cases = [
        ("Ψ1{0}", psi_lift(&LatticeFunction::indicator(0, 0), 0)),
        ("Φx²", phi_lift(&EvenPolynomial::monomial(1, 1), 4).truncate_to_domain()),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, f) in cases {
        match verify_pt_approximation(label, &f, &ts, &default_sample_points(), &rates, DEFAULT_EXPM_TOL) {
            Ok(r) => {
                pass &= r.pass;
                parts.push(format!("{label} order {:.3}", r.observed_order.unwrap_or(f64::INFINITY)));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{label}: {e}"));
            }
        }
    }
    outcome(pass, format!("{} (>= 0.8, deviations decreasing)", parts.join(", ")))
}

fn explosion_moments() -> Outcome {
    let n = 100_000;
    let mut pass = true;
    let mut parts = Vec::new();
    for y0 in [0u64, 3] {
        let cfg = SimConfig { n_paths: n, master_seed: SEED + y0, ..Default::default() };
        let times = match birth_ensemble(y0, &cfg, Executor::Parallel) {
            Ok(t) => t,
            Err(e) => return outcome(false, e.to_string()),
        };
        let nf = n as f64;
        let mean = times.iter().sum::<f64>() / nf;
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let m4 = times.iter().map(|t| (t - mean).powi(4)).sum::<f64>() / nf;
        let (d, v) = (explosion_mean(y0), explosion_variance(y0));
        let se_mean = (v / nf).sqrt();
        let se_var = ((m4 - var * var) / nf).sqrt();
        let ok = (mean - d).abs() <= 3.0 * se_mean && (var - v).abs() <= 3.0 * se_var;
        pass &= ok;
        parts.push(format!(
            "y0={y0}: mean {mean:.5} vs {d:.5} ({:.1} se), var {var:.5} vs {v:.5} ({:.1} se)",
            (mean - d).abs() / se_mean,
            (var - v).abs() / se_var
        ));
    }
    outcome(pass, format!("{} (within 3 se, {n} draws)", parts.join("; ")))
}

fn diffusion_second_moment() -> Outcome {
    let ts = [0.25, 0.5];
    let cfg = SimConfig { n_paths: 100_000, dt_base: 1e-4, t_max: 0.5, master_seed: SEED, ..Default::default() };
    let report = wf_ensemble(0.0, &cfg, &ts, Executor::Parallel).and_then(|r| check_moments(&r, 0.0, &ts));
    match report {
        Ok(rep) => {
            let parts: Vec<String> = rep
                .times
                .iter()
                .map(|m| format!("t={}: {:.5} vs {:.5} (se {:.1e})", m.t, m.mean, m.target, m.se))
                .collect();
            outcome(rep.within(3.0, 0.005), format!("E[X_t²] from x0=0, {}; tol 3 se + 0.005", parts.join(", ")))
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn averaging() -> Outcome {
    let ts = [0.05, 0.2];
    let x0 = 0.5;
    let cfg = SimConfig { n_paths: 100_000, t_max: 0.2, master_seed: SEED, ..Default::default() };
    let report = coupled_ensemble(x0, &cfg, &ts, Executor::Parallel).and_then(|r| check_averaging(&r, x0, &ts));
    match report {
        Ok(rep) => {
            let tv = rep.max_tv();
            let z0 = rep.p0_max_z();
            outcome(
                tv <= 0.02 && z0 <= 3.0,
                format!(
                    "x0={x0}: max TV {tv:.4} <= 0.02; P(Y_t=0) within {z0:.2} se <= 3; cross moments max {:.2} se",
                    rep.cross_moment_max_z()
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn absorption_law() -> Outcome {
    let n = 10_000;
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, x0) in [0.0, 0.5].into_iter().enumerate() {
        let cfg = SimConfig {
            n_paths: n,
            boundary_eps: 1e-4,
            t_max: 20.0,
            master_seed: SEED + k as u64,
            ..Default::default()
        };
        let run = || -> wf_intertwine::Result<(f64, f64)> {
            let recs = wf_ensemble(x0, &cfg, &[], Executor::Parallel)?;
            let times: Vec<f64> = recs
                .iter()
                .map(|r| {
                    r.absorption_time
                        .ok_or_else(|| wf_intertwine::Error::NumericFailure("path not absorbed by t=20".into()))
                })
                .collect::<wf_intertwine::Result<_>>()?;
            let law = AbsorptionLaw::new(x0, DEFAULT_N_TRUNC, 10.0, 1e-4)?;
            let d_law = ks_statistic(&times, |t| law.bounds(t))?;
            let mixture = birth_mixture_ensemble(x0, &cfg, Executor::Parallel)?;
            let d_two = ks_two_sample(&times, &mixture)?;
            Ok((d_law, d_two))
        };
        match run() {
            Ok((d_law, d_two)) => {
                pass &= d_law <= 0.03 && d_two <= 0.03;
                parts.push(format!("x0={x0}: D vs bounds {d_law:.4}, two-sample D {d_two:.4}"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("x0={x0}: {e}"));
            }
        }
    }
    outcome(
        pass,
        format!(
            "{} (<= 0.03; 1% critical values {:.4} and {:.4})",
            parts.join("; "),
            ks_critical_value(n),
            ks_two_sample_critical_value(n, n)
        ),
    )
}

fn maximum_principle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    match positive_maximum_check(5, 10_000, &mut rng, &BirthRates::standard()) {
        Ok(r) => outcome(
            r.violations == 0,
            format!(
                "n=5, {} trials ({} with a nonnegative maximum): {} violations, worst scaled value {:.2e}",
                r.trials, r.tested, r.violations, r.worst_scaled_value
            ),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn drift_sign() -> Outcome {
    let cfg = SimConfig { n_paths: 20_000, t_max: 5.0, level_cap: 32, master_seed: SEED, ..Default::default() };
    match drift_sign_check(0.5, &cfg, 4, Executor::Parallel) {
        Ok(r) => {
            let tested: Vec<_> = r.bins.iter().filter(|b| b.tested).collect();
            let worst = tested.iter().map(|b| b.z * b.predicted_sign).fold(f64::INFINITY, f64::min);
            outcome(
                r.pass,
                format!(
                    "levels 0..=3: {} bins tested, smallest signed z {worst:.1} >= 3, levels without a tested bin {:?}",
                    tested.len(),
                    r.untested_levels
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("generator intertwining G K = K H", intertwining_exact_and_float),
        ("semigroup intertwining P_t K = K Q_t", semigroup_intertwining),
        ("lifted intertwinings Λ and Ψ", lifted_intertwinings),
        ("short-time approximation order", short_time_approximation),
        ("explosion time moments", explosion_moments),
        ("diffusion second moment", diffusion_second_moment),
        ("averaging of the coupled level", averaging),
        ("absorption time law", absorption_law),
        ("positive maximum principle", maximum_principle),
        ("drift sign by level", drift_sign),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {name}: {} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
