//! The short-time approximation `𝐏^(t) f = Q_t (P_t(fK) / P_t K)` of the
//! coupled semigroup and its convergence to the coupled generator.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::generator::apply_coupled_generator;
use crate::error::{invalid, Error, Result};
use crate::expm::expm;
use crate::kernels::CoupledFunction;
use crate::matrix::Matrix;
use crate::poly::{build_g_matrix, build_h_matrix_with, BirthRates, EvenPolynomial, Level, FLOAT_DEGREE_CAP};

/// Quotients whose denominator `P_t K(·, y)(x)` falls below this are not formed.
pub const MIN_DENOMINATOR: f64 = 1e-14;

/// Deviations below this at every step size mean the approximation is exact
/// on the sampled points (e.g. for constants).
pub const EXACT_FLOOR: f64 = 1e-12;

/// Minimum observed convergence order for a pass.
pub const MIN_ORDER: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub x: f64,
    pub y: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedPoint {
    pub x: f64,
    pub y: u64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationReport {
    pub identity: String,
    pub label: String,
    pub ts: Vec<f64>,
    /// Max over the sample points of `|(𝐏^(t) f - f)/t - 𝐆 f|`, one entry per `t`.
    pub deviations: Vec<f64>,
    /// Least-squares slope of `ln deviation` against `ln t`; `None` when the
    /// deviations are below [`EXACT_FLOOR`] throughout.
    pub observed_order: Option<f64>,
    pub excluded: Vec<ExcludedPoint>,
    pub pass: bool,
    #[serde(skip)]
    pub elapsed_secs: f64,
}

/// Evaluates `𝐏^(t) f` at the sample points. `None` marks points whose
/// quotient would divide by less than [`MIN_DENOMINATOR`].
pub fn approximate_semigroup(
    f: &CoupledFunction<f64>,
    t: f64,
    points: &[SamplePoint],
    rates: &BirthRates,
    expm_tol: f64,
) -> Result<Vec<Option<f64>>> {
    let Some(tail) = (match f.beyond() {
        crate::kernels::Beyond::Constant(c) => Some(*c),
        crate::kernels::Beyond::RepeatLast => None,
    }) else {
        return Err(Error::NotInDomain("levels repeat beyond the cutoff; truncate first".into()));
    };
    let y0 = f.cutoff();
    let big_n = f.degree_bound() + y0 + 1;
    if big_n > FLOAT_DEGREE_CAP {
        return Err(invalid(format!("products f K need degree bound {big_n}, above the float cap {FLOAT_DEGREE_CAP}")));
    }
    let pg = expm(&build_g_matrix::<f64>(big_n).matrix, t, expm_tol)?;
    let qh = expm(&build_h_matrix_with::<f64>(y0, rates).matrix, t, expm_tol)?;

    // P_t(f_y K(·,y)) and P_t K(·,y) as polynomials, for every stored level
    let mut numerators = Vec::with_capacity(y0 + 1);
    let mut denominators = Vec::with_capacity(y0 + 1);
    for (y, level) in f.levels().iter().enumerate() {
        let k = kernel_column(y);
        let fk = level.mul(&k).padded(big_n)?;
        numerators.push(propagate(&pg, &fk)?);
        denominators.push(propagate(&pg, &k.padded(big_n)?)?);
    }

    Ok(points
        .iter()
        .map(|p| {
            let start = p.y as usize;
            if start > y0 {
                // the quotient is identically the tail beyond the cutoff
                return Some(tail);
            }
            let mut acc = qh.get(start, y0 + 1) * tail;
            for y in start..=y0 {
                let den = denominators[y].evaluate(p.x);
                if den < MIN_DENOMINATOR {
                    return None;
                }
                acc += qh.get(start, y) * numerators[y].evaluate(p.x) / den;
            }
            Some(acc)
        })
        .collect())
}

/// `K(·, y) = x^{2y} - x^{2y+2}`.
fn kernel_column(y: usize) -> EvenPolynomial<f64> {
    let mut c = vec![0.0; y + 2];
    c[y] = 1.0;
    c[y + 1] = -1.0;
    EvenPolynomial::new(c).expect("nonempty")
}

fn propagate(pg: &Matrix<f64>, p: &EvenPolynomial<f64>) -> Result<EvenPolynomial<f64>> {
    EvenPolynomial::new(pg.mul_vec(p.coeffs()))
}

/// Checks that `(𝐏^(t) f - f)/t → 𝐆 f` at first order as `t ↓ 0`.
///
/// `f` must lie in the generator domain. Points excluded at some `t` are
/// dropped from that step's maximum and listed in the report.
pub fn verify_pt_approximation(
    label: &str,
    f: &CoupledFunction<f64>,
    ts: &[f64],
    points: &[SamplePoint],
    rates: &BirthRates,
    expm_tol: f64,
) -> Result<ApproximationReport> {
    let start = Instant::now();
    if ts.len() < 2 || ts.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(invalid("need at least two positive step sizes"));
    }
    if points.is_empty() {
        return Err(invalid("need at least one sample point"));
    }
    if points.iter().any(|p| !(0.0..1.0).contains(&p.x)) {
        return Err(invalid("sample points need x in [0, 1) so that K(x, y) > 0"));
    }
    let gf = apply_coupled_generator(f, rates)?;
    let target: Vec<f64> = points.iter().map(|p| gf.evaluate(p.x, Level::Finite(p.y))).collect();
    let base: Vec<f64> = points.iter().map(|p| f.evaluate(p.x, Level::Finite(p.y))).collect();

    let mut deviations = Vec::with_capacity(ts.len());
    let mut excluded = Vec::new();
    for &t in ts {
        let approx = approximate_semigroup(f, t, points, rates, expm_tol)?;
        let mut worst = 0.0f64;
        for (i, v) in approx.iter().enumerate() {
            match v {
                Some(v) => worst = worst.max(((v - base[i]) / t - target[i]).abs()),
                None => excluded.push(ExcludedPoint { x: points[i].x, y: points[i].y, t }),
            }
        }
        deviations.push(worst);
    }

    let exact = deviations.iter().all(|&d| d < EXACT_FLOOR);
    let observed_order = (!exact).then(|| log_log_slope(ts, &deviations));
    let mut by_t: Vec<(f64, f64)> = ts.iter().copied().zip(deviations.iter().copied()).collect();
    by_t.sort_by(|a, b| b.0.total_cmp(&a.0));
    let decreasing = by_t.windows(2).all(|w| w[1].1 <= w[0].1);
    let pass = exact || (decreasing && observed_order.is_some_and(|o| o >= MIN_ORDER));
    Ok(ApproximationReport {
        identity: "Pt-approximation".into(),
        label: label.into(),
        ts: ts.to_vec(),
        deviations,
        observed_order,
        excluded,
        pass,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

fn log_log_slope(ts: &[f64], ds: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ts.iter().zip(ds).map(|(t, d)| (t.ln(), d.max(f64::MIN_POSITIVE).ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// The sample points used by default.
pub fn default_sample_points() -> Vec<SamplePoint> {
    [(0.2, 0), (0.5, 0), (0.8, 0), (0.5, 1), (0.7, 2)].into_iter().map(|(x, y)| SamplePoint { x, y }).collect()
}
