//! Positive maximum principle for the coupled generator, checked on random
//! elements of `L_n`.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::generator::apply_coupled_generator;
use crate::error::{invalid, Result};
use crate::kernels::CoupledFunction;
use crate::poly::{BirthRates, EvenPolynomial, Level};

/// Uniform grid size on `[0, 1]` used to bracket critical points.
pub const GRID_POINTS: usize = 2001;

/// Relative slack: a violation needs `𝐆 f > 1e-8 (1 + ‖f‖)` at a nonnegative maximum.
pub const REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Maximizer {
    pub x: f64,
    pub y: Level,
    pub value: f64,
    /// `sup |f|` over the search set.
    pub sup_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub trial: usize,
    pub at: Maximizer,
    pub generator_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximumPrincipleReport {
    pub identity: String,
    pub n: usize,
    pub trials: usize,
    /// Trials whose maximum was nonnegative (the only ones that test anything).
    pub tested: usize,
    pub violations: usize,
    /// Largest `𝐆 f / (1 + ‖f‖)` seen at a nonnegative maximum.
    pub worst_scaled_value: f64,
    pub first_violation: Option<Violation>,
    pub pass: bool,
    #[serde(skip)]
    pub elapsed_secs: f64,
}

/// Locates `max f` over `[0,1] × {0, ..., cutoff + 1} ∪ {(1, ∞)}`.
///
/// Each level is scanned on a [`GRID_POINTS`] grid; sign changes of `f'` are
/// refined by bisection so the maximizer is a true critical point up to
/// rounding. Ties go to the smaller `x`, then the lower level.
pub fn locate_maximum(f: &CoupledFunction<f64>) -> Maximizer {
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| i as f64 / (GRID_POINTS - 1) as f64).collect();
    let tail = f.tail();
    let mut best = Maximizer { x: 0.0, y: Level::Finite(f.cutoff() as u64 + 1), value: tail, sup_norm: tail.abs() };
    let mut sup = tail.abs();
    let mut consider = |x: f64, y: usize, v: f64, best: &mut Maximizer| {
        sup = sup.max(v.abs());
        let y = Level::Finite(y as u64);
        if v > best.value || (v == best.value && (x < best.x || (x == best.x && y < best.y))) {
            *best = Maximizer { x, y, value: v, sup_norm: 0.0 };
        }
    };
    for (y, p) in f.levels().iter().enumerate() {
        let dq = derivative_factor(p);
        let mut prev: Option<(f64, f64)> = None;
        for &x in &grid {
            consider(x, y, p.evaluate(x), &mut best);
            let q = evaluate_in_square(&dq, x);
            if let Some((xa, qa)) = prev {
                if qa != 0.0 && q != 0.0 && (qa < 0.0) != (q < 0.0) {
                    let root = bisect(&dq, xa, x);
                    consider(root, y, p.evaluate(root), &mut best);
                }
            }
            prev = Some((x, q));
        }
    }
    best.sup_norm = sup;
    best
}

/// Coefficients of `q` with `p'(x) = x q(x²)`.
fn derivative_factor(p: &EvenPolynomial<f64>) -> Vec<f64> {
    p.coeffs().iter().enumerate().skip(1).map(|(k, c)| 2.0 * k as f64 * c).collect()
}

fn evaluate_in_square(q: &[f64], x: f64) -> f64 {
    let u = x * x;
    q.iter().rev().fold(0.0, |acc, c| acc * u + c)
}

fn bisect(q: &[f64], mut a: f64, mut b: f64) -> f64 {
    let qa_neg = evaluate_in_square(q, a) < 0.0;
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (evaluate_in_square(q, m) < 0.0) == qa_neg {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// A random element of `L_n` with coefficients and tail uniform on `(-1, 1)`.
pub fn random_coupled_function<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CoupledFunction<f64> {
    let levels = (0..=n)
        .map(|_| {
            EvenPolynomial::new((0..=n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("n + 1 coefficients")
        })
        .collect();
    CoupledFunction::new(levels, rng.random_range(-1.0..1.0)).expect("n + 1 levels")
}

/// Checks `𝐆 f ≤ 0` at every nonnegative maximum of `trials` random `f ∈ L_n`.
pub fn positive_maximum_check<R: Rng + ?Sized>(
    n: usize,
    trials: usize,
    rng: &mut R,
    rates: &BirthRates,
) -> Result<MaximumPrincipleReport> {
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let start = Instant::now();
    let mut report = MaximumPrincipleReport {
        identity: "positive-maximum-principle".into(),
        n,
        trials,
        tested: 0,
        violations: 0,
        worst_scaled_value: f64::NEG_INFINITY,
        first_violation: None,
        pass: false,
        elapsed_secs: 0.0,
    };
    for trial in 0..trials {
        let f = random_coupled_function(n, rng);
        if let Some(v) = check_one(&f, rates)? {
            report.tested += 1;
            let scaled = v.generator_value / (1.0 + v.at.sup_norm);
            report.worst_scaled_value = report.worst_scaled_value.max(scaled);
            if scaled > REL_TOL {
                report.violations += 1;
                report.first_violation.get_or_insert(Violation { trial, ..v });
            }
        }
    }
    report.pass = report.violations == 0;
    report.elapsed_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

/// `𝐆 f` at the maximizer of `f`, or `None` if the maximum is negative.
pub fn check_one(f: &CoupledFunction<f64>, rates: &BirthRates) -> Result<Option<Violation>> {
    let at = locate_maximum(f);
    if at.value < 0.0 {
        return Ok(None);
    }
    let gf = apply_coupled_generator(f, rates)?;
    Ok(Some(Violation { trial: 0, at, generator_value: gf.evaluate(at.x, at.y) }))
}
