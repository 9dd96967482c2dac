//! Kolmogorov–Smirnov distances, one-sample against CDF bounds and two-sample.

use crate::error::{invalid, Result};

/// 99% asymptotic critical value coefficient of the KS distribution.
pub const KS_COEFF_99: f64 = 1.63;

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(invalid("KS statistic of an empty sample"));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(invalid("KS statistic of a sample containing NaN"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Conservative one-sample distance against a CDF known only up to bounds:
/// `sup_t max(F_emp(t) - upper(t), lower(t) - F_emp(t-), 0)`.
///
/// With `lower = upper` this is the classical statistic.
pub fn ks_statistic(samples: &[f64], mut bounds: impl FnMut(f64) -> (f64, f64)) -> Result<f64> {
    let s = sorted(samples)?;
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &v) in s.iter().enumerate() {
        let (lo, hi) = bounds(v);
        let above = (i + 1) as f64 / n - hi;
        let below = lo - i as f64 / n;
        d = d.max(above).max(below);
    }
    Ok(d)
}

/// Two-sample distance `sup_t |F_a(t) - F_b(t)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// `1.63 / √n`, the one-sample rejection threshold at the 1% level.
pub fn ks_critical_value(n: usize) -> f64 {
    KS_COEFF_99 / (n as f64).sqrt()
}

/// `1.63 √((n + m) / (n m))`, the two-sample threshold at the 1% level.
pub fn ks_two_sample_critical_value(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    KS_COEFF_99 * ((n + m) / (n * m)).sqrt()
}
