//! Distributional targets: explosion and absorption laws with rigorous
//! truncation bounds, scale/speed diagnostics and KS statistics.

mod absorption;
mod hypoexp;
mod ks;
mod special;

pub use absorption::{
    absorption_cdf_from, absorption_mean, mixture_levels, AbsorptionLaw, KERNEL_MASS_CUTOFF, MAX_TABLE_LEVELS,
};
pub use hypoexp::{hypoexp_cdf, hypoexp_cdf_expm, HypoexpSpec, CANCELLATION_RATIO, DEFAULT_N_TRUNC};
pub use ks::{ks_critical_value, ks_statistic, ks_two_sample, ks_two_sample_critical_value, KS_COEFF_99};
pub use special::{explosion_mean, explosion_variance, hurwitz_zeta, trigamma};

use crate::error::{invalid, Result};

/// Scale-function derivative `u'(x) = 1/(x^{4y} (1-x²)²)` and speed density
/// `m(x) = x^{4y} (1-x²)` of the diffusion conditioned on level `y`.
pub fn scale_speed(y: u64, x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0 && x < 1.0) {
        return Err(invalid(format!("scale and speed are singular at x={x}; need 0 < x < 1")));
    }
    let p = crate::kernels::geometric_tail(x, 2 * y);
    let q = 1.0 - x * x;
    Ok((1.0 / (p * q * q), p * q))
}
