//! Law of the absorption time of the diffusion started at `x`: a mixture over
//! `K(x, ·)` of explosion times from the mixed start level.

use serde::{Deserialize, Serialize};

use super::hypoexp::{hypoexp_cdf, hypoexp_cdf_expm, sandwich, HypoexpSpec};
use super::special::{explosion_mean, explosion_variance};
use crate::error::{invalid, Error, Result};
use crate::expm::expm;
use crate::kernels::{geometric_tail, kernel_k_eval};
use crate::poly::{birth_rate, build_h_matrix, Level, DEFAULT_EXPM_TOL};

/// Start levels are dropped once the remaining `K(x, ·)` mass falls below this;
/// the dropped mass widens the upper bound.
pub const KERNEL_MASS_CUTOFF: f64 = 1e-10;

/// Largest truncated chain [`AbsorptionLaw`] will exponentiate.
pub const MAX_TABLE_LEVELS: u64 = 400;

fn check_start(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid(format!("start point x={x} outside [0, 1]")));
    }
    Ok(())
}

/// Last start level kept and the `K(x, ·)` mass beyond it.
pub fn mixture_levels(x: f64) -> Result<(u64, f64)> {
    check_start(x)?;
    if x == 1.0 {
        return Err(invalid("x = 1 starts at the absorbing point"));
    }
    let mut last = 0u64;
    while geometric_tail(x, last + 1) >= KERNEL_MASS_CUTOFF {
        last += 1;
    }
    Ok((last, geometric_tail(x, last + 1)))
}

/// Bounds on `P(τ <= t)` for the absorption time `τ` of the diffusion from `x`.
///
/// Each start level `y` uses levels `y..=y + n_trunc` exactly. Levels whose
/// partial-fraction weights cancel are evaluated through a matrix exponential.
/// `x = 1` is already absorbed: the law is the point mass at 0.
pub fn absorption_cdf_from(x: f64, t: f64, n_trunc: u64) -> Result<(f64, f64)> {
    check_start(x)?;
    if t.is_nan() || t < 0.0 {
        return Err(invalid(format!("CDF argument must be >= 0, got {t}")));
    }
    if x == 1.0 {
        return Ok((1.0, 1.0));
    }
    let (last, rest) = mixture_levels(x)?;
    let (mut lower, mut upper) = (0.0, rest);
    for y in 0..=last {
        let w = kernel_k_eval(x, Level::Finite(y))?;
        let spec = HypoexpSpec::new(y, y + n_trunc)?;
        let (lo, hi) = match hypoexp_cdf(t, &spec) {
            Err(Error::Cancellation { .. }) => hypoexp_cdf_expm(t, &spec)?,
            other => other?,
        };
        lower += w * lo;
        upper += w * hi;
    }
    let upper = upper.min(1.0);
    Ok((lower.min(upper), upper))
}

/// `E[τ] = Σ_y K(x, y) Σ_{z>=y} 1/λ_z`.
pub fn absorption_mean(x: f64) -> Result<f64> {
    check_start(x)?;
    if x == 1.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut y = 0u64;
    loop {
        total += kernel_k_eval(x, Level::Finite(y))? * explosion_mean(y);
        y += 1;
        if geometric_tail(x, y) < 1e-17 {
            return Ok(total);
        }
    }
}

/// Tabulated bounds on the absorption-time CDF from a fixed `x`, for fast
/// repeated evaluation (KS statistics over thousands of samples).
///
/// A single truncated chain on levels `0..=N` is stepped forward by
/// `exp(step · H_N)`; column `N + 1` of `exp(t H_N)` gives every start level's
/// truncated CDF at once. Lookups between grid points round outward, so the
/// bounds stay rigorous up to the matrix-exponential accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionLaw {
    pub x: f64,
    pub n_trunc: u64,
    pub step: f64,
    /// `Σ_{y<=L} K(x, y) F_{y..N}(j · step)`.
    values: Vec<f64>,
    remainder: f64,
    tail_mean: f64,
    tail_variance: f64,
    slope_bound: f64,
    /// The law is the point mass at 0.
    degenerate: bool,
}

impl AbsorptionLaw {
    /// Tabulates on `[0, t_max]` with the given grid step.
    pub fn new(x: f64, n_trunc: u64, t_max: f64, step: f64) -> Result<Self> {
        check_start(x)?;
        if !(step > 0.0 && t_max > 0.0 && t_max.is_finite()) {
            return Err(invalid("table needs step > 0 and a finite t_max > 0"));
        }
        if n_trunc == 0 {
            return Err(invalid("table needs n_trunc >= 1"));
        }
        if x == 1.0 {
            return Ok(AbsorptionLaw {
                x,
                n_trunc,
                step,
                values: vec![1.0],
                remainder: 0.0,
                tail_mean: 0.0,
                tail_variance: 0.0,
                slope_bound: 0.0,
                degenerate: true,
            });
        }
        let (last, remainder) = mixture_levels(x)?;
        let n = last + n_trunc;
        if n > MAX_TABLE_LEVELS {
            return Err(invalid(format!(
                "x={x} needs {n} levels in the table (limit {MAX_TABLE_LEVELS}); use the birth simulator"
            )));
        }
        let weights: Vec<f64> = (0..=last).map(|y| kernel_k_eval(x, Level::Finite(y))).collect::<Result<_>>()?;
        let slope_bound = (0..=last).map(|y| weights[y as usize] * (birth_rate(y) * birth_rate(y + 1)) as f64).sum();

        let dim = n as usize + 2;
        let e = expm(&build_h_matrix::<f64>(n as usize).matrix, step, DEFAULT_EXPM_TOL)?;
        let steps = (t_max / step).ceil() as usize;
        let mut u = vec![0.0; dim];
        u[dim - 1] = 1.0;
        let mut values = Vec::with_capacity(steps + 1);
        values.push(0.0);
        for _ in 0..steps {
            u = e.mul_vec(&u);
            values.push(weights.iter().zip(&u).map(|(w, p)| w * p).sum());
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericFailure("absorption table produced non-finite values".into()));
        }
        Ok(AbsorptionLaw {
            x,
            n_trunc,
            step,
            values,
            remainder,
            tail_mean: explosion_mean(n + 1),
            tail_variance: explosion_variance(n + 1),
            slope_bound,
            degenerate: false,
        })
    }

    pub fn t_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    fn lookup_lo(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let i = (s / self.step).floor() as usize;
        self.values[i.min(self.values.len() - 1)]
    }

    fn lookup_hi(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let i = (s / self.step).ceil() as usize;
        // past the grid all that is known is that the mixture mass is 1 - remainder
        self.values.get(i).copied().unwrap_or(1.0 - self.remainder)
    }

    /// `(lower, upper)` bounds on `P(τ <= t)`.
    pub fn bounds(&self, t: f64) -> (f64, f64) {
        if self.degenerate {
            return if t >= 0.0 { (1.0, 1.0) } else { (0.0, 0.0) };
        }
        let r = self.remainder;
        let (lo, hi) = sandwich(
            t.max(0.0),
            self.tail_mean,
            self.tail_variance,
            self.slope_bound,
            |s| Ok(self.lookup_lo(s)),
            |s| Ok(self.lookup_hi(s) + r),
        )
        .expect("lookups are infallible");
        (lo.min(hi), hi)
    }

    /// Rows `(t, lower, upper)` on a uniform grid, for CSV output.
    pub fn table(&self, t_max: f64, points: usize) -> Vec<(f64, f64, f64)> {
        (0..points)
            .map(|i| {
                let t = t_max * i as f64 / (points.max(2) - 1) as f64;
                let (lo, hi) = self.bounds(t);
                (t, lo, hi)
            })
            .collect()
    }
}
