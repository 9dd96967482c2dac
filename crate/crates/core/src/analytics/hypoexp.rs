//! Law of the explosion time `T = Σ_{y>=y0} E_y`, `E_y ~ Exp(λ_y)`.
//!
//! The first levels `y0..=n` are handled exactly by the distinct-rate
//! partial-fraction formula; the remainder `R = Σ_{y>n} E_y` has known mean
//! `m` and variance `v`, which give rigorous two-sided bounds on the CDF of `T`.
//!
//! * Monotonicity: `R >= 0`, so `F(t) <= F_n(t)`.
//! * Markov: `P(R >= δ) <= m/δ`, so `F(t) >= F_n(t - δ) - m/δ` for every `δ > 0`.
//! * Second order: with at least two rates `F_n` has a Lipschitz density whose
//!   slope is bounded by `M = λ_a λ_b` (the two smallest rates), so a Taylor
//!   expansion around `t - m` gives `|F(t) - F_n(t - m)| <= M v / 2`.

use serde::{Deserialize, Serialize};

use super::special::{explosion_mean, explosion_variance};
use crate::error::{invalid, Error, Result};
use crate::expm::expm;
use crate::matrix::Matrix;
use crate::poly::{birth_rate, DEFAULT_EXPM_TOL};

/// Default last level summed exactly.
pub const DEFAULT_N_TRUNC: u64 = 25;

/// `Σ|terms| > CANCELLATION_RATIO · |Σ terms|` is reported as lost precision.
pub const CANCELLATION_RATIO: f64 = 1e6;

/// Number of log-spaced `δ` values tried in the Markov bound.
const MARKOV_GRID: usize = 48;

/// The truncated sum `E_{y0} + ... + E_n` plus the moments of the remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypoexpSpec {
    pub start: u64,
    pub n_trunc: u64,
    pub rates: Vec<f64>,
    /// `E[R] = Σ_{y > n_trunc} 1/λ_y`.
    pub tail_mean: f64,
    /// `Var[R] = Σ_{y > n_trunc} 1/λ_y²`.
    pub tail_variance: f64,
    weights: Vec<f64>,
}

impl HypoexpSpec {
    /// Levels `start..=n_trunc` of the birth process with the standard rates.
    pub fn new(start: u64, n_trunc: u64) -> Result<Self> {
        if n_trunc < start {
            return Err(invalid(format!("truncation level {n_trunc} below start level {start}")));
        }
        let rates: Vec<f64> = (start..=n_trunc).map(|y| birth_rate(y) as f64).collect();
        Ok(HypoexpSpec {
            start,
            n_trunc,
            weights: partial_fraction_weights(&rates),
            rates,
            tail_mean: explosion_mean(n_trunc + 1),
            tail_variance: explosion_variance(n_trunc + 1),
        })
    }

    /// An arbitrary sum of exponentials with no remainder.
    pub fn from_rates(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(invalid("need at least one rate"));
        }
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) || rates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("rates must be positive, finite and strictly increasing"));
        }
        Ok(HypoexpSpec {
            start: 0,
            n_trunc: rates.len() as u64 - 1,
            weights: partial_fraction_weights(&rates),
            rates,
            tail_mean: 0.0,
            tail_variance: 0.0,
        })
    }

    /// Partial-fraction weights `w_y = Π_{z≠y} λ_z / (λ_z - λ_y)`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Bound on `|F_n''|`; infinite for a single exponential.
    pub fn slope_bound(&self) -> f64 {
        match self.rates.as_slice() {
            [a, b, ..] => a * b,
            _ => f64::INFINITY,
        }
    }

    /// `F_n(t) = P(E_{y0} + ... + E_n <= t)` by partial fractions.
    pub fn truncated_cdf(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let mut terms: Vec<f64> = self.weights().iter().zip(&self.rates).map(|(w, l)| w * (-l * t).exp()).collect();
        terms.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        let magnitude: f64 = terms.iter().map(|v| v.abs()).sum();
        let survival = neumaier_sum(&terms);
        let fine = magnitude <= CANCELLATION_RATIO * survival.abs();
        if !fine && magnitude > 0.0 {
            return Err(Error::Cancellation { t, ratio: magnitude / survival.abs() });
        }
        Ok((1.0 - survival).clamp(0.0, 1.0))
    }

    /// `F_n(t)` as the absorption probability of the truncated chain, through a
    /// matrix exponential. Slower, but immune to cancellation.
    pub fn truncated_cdf_expm(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let k = self.rates.len();
        let mut h = Matrix::zeros(k + 1, k + 1);
        for (i, &l) in self.rates.iter().enumerate() {
            h.set(i, i, -l);
            h.set(i, i + 1, l);
        }
        Ok(expm(&h, t, DEFAULT_EXPM_TOL)?.get(0, k).clamp(0.0, 1.0))
    }
}

fn partial_fraction_weights(rates: &[f64]) -> Vec<f64> {
    rates
        .iter()
        .enumerate()
        .map(|(i, &ly)| rates.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &lz)| lz / (lz - ly)).product())
        .collect()
}

fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Two-sided bounds on `P(T <= t)` from a truncated CDF and the remainder moments.
///
/// `cdf_lo` / `cdf_hi` may be conservative lookups of the same function; they
/// must satisfy `cdf_lo(s) <= F_n(s) <= cdf_hi(s)`.
pub(crate) fn sandwich(
    t: f64,
    tail_mean: f64,
    tail_variance: f64,
    slope_bound: f64,
    mut cdf_lo: impl FnMut(f64) -> Result<f64>,
    mut cdf_hi: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    if t.is_nan() || t < 0.0 {
        return Err(invalid(format!("CDF argument must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok((0.0, 0.0));
    }
    let mut upper = cdf_hi(t)?;
    let mut lower = if tail_mean == 0.0 { cdf_lo(t)? } else { 0.0 };
    if tail_mean > 0.0 {
        let half = 0.5 * slope_bound * tail_variance;
        if half.is_finite() {
            upper = upper.min(cdf_hi(t - tail_mean)? + half);
            lower = lower.max(cdf_lo(t - tail_mean)? - half);
        }
        if t > tail_mean {
            let ratio = (t / tail_mean).ln();
            for i in 0..MARKOV_GRID {
                let delta = tail_mean * (ratio * i as f64 / (MARKOV_GRID - 1) as f64).exp();
                lower = lower.max(cdf_lo(t - delta)? - tail_mean / delta);
            }
        }
    }
    let upper = upper.clamp(0.0, 1.0);
    Ok((lower.clamp(0.0, upper), upper))
}

/// Rigorous bounds `(lower, upper)` on the CDF of the full explosion time.
pub fn hypoexp_cdf(t: f64, spec: &HypoexpSpec) -> Result<(f64, f64)> {
    sandwich(
        t,
        spec.tail_mean,
        spec.tail_variance,
        spec.slope_bound(),
        |s| spec.truncated_cdf(s),
        |s| spec.truncated_cdf(s),
    )
}

/// As [`hypoexp_cdf`], with `F_n` taken from a matrix exponential.
pub fn hypoexp_cdf_expm(t: f64, spec: &HypoexpSpec) -> Result<(f64, f64)> {
    sandwich(
        t,
        spec.tail_mean,
        spec.tail_variance,
        spec.slope_bound(),
        |s| spec.truncated_cdf_expm(s),
        |s| spec.truncated_cdf_expm(s),
    )
}
