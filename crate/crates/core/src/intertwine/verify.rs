use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::generator::build_coupled_generator_with;
use crate::expm::expm;
use crate::kernels::{kernel_k_matrix, lambda_matrix, psi_matrix};
use crate::matrix::Matrix;
use crate::poly::{build_g_matrix, build_h_matrix_with, BirthRates, DEFAULT_EXPM_TOL};
use crate::scalar::{Arithmetic, Rational, Scalar};
use crate::Result;

/// Outcome of one matrix-level identity check.
///
/// `pass` holds exactly when `max_abs_residual <= tolerance`; in exact mode the
/// tolerance is zero and the residual matrix is compared with zero symbolically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub identity: String,
    pub n: usize,
    pub mode: Arithmetic,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub max_abs_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Wall-clock time; kept out of serialized reports so reruns compare equal.
    #[serde(skip)]
    pub elapsed_secs: f64,
}

/// Settings shared by the identity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub mode: Arithmetic,
    /// Pass threshold on the residual in float mode. Ignored in exact mode.
    pub tol: f64,
    /// Target accuracy of matrix exponentials.
    pub expm_tol: f64,
    /// Rates used for every birth-process ingredient; the diffusion side never reads them.
    pub rates: BirthRates,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { mode: Arithmetic::Exact, tol: 1e-12, expm_tol: DEFAULT_EXPM_TOL, rates: BirthRates::standard() }
    }
}

impl VerifyOptions {
    pub fn float(tol: f64) -> Self {
        VerifyOptions { mode: Arithmetic::Float, tol, ..Self::default() }
    }
}

fn report<S: Scalar>(
    identity: &str,
    n: usize,
    t: Option<f64>,
    residual: &Matrix<S>,
    tol: f64,
    start: Instant,
) -> VerificationReport {
    let max_abs_residual = residual.max_abs();
    let (tolerance, pass) = match S::ARITHMETIC {
        Arithmetic::Exact => (0.0, residual.is_zero()),
        Arithmetic::Float => (tol, max_abs_residual.is_finite() && max_abs_residual <= tol),
    };
    VerificationReport {
        identity: identity.to_owned(),
        n,
        mode: S::ARITHMETIC,
        t,
        max_abs_residual,
        tolerance,
        pass,
        elapsed_secs: start.elapsed().as_secs_f64(),
    }
}

fn gk_kh<S: Scalar>(y0: usize, opts: &VerifyOptions) -> VerificationReport {
    let start = Instant::now();
    let k = kernel_k_matrix::<S>(y0);
    let g = build_g_matrix::<S>(y0 + 1).matrix;
    let h = build_h_matrix_with::<S>(y0, &opts.rates).matrix;
    let residual = g.mul(&k).sub(&k.mul(&h));
    report("GK=KH", y0, None, &residual, opts.tol, start)
}

/// `G K = K H` on lattice functions with cutoff `y0`.
pub fn verify_gk_kh(y0: usize, opts: &VerifyOptions) -> VerificationReport {
    match opts.mode {
        Arithmetic::Exact => gk_kh::<Rational>(y0, opts),
        Arithmetic::Float => gk_kh::<f64>(y0, opts),
    }
}

/// `P_t K = K Q_t` on lattice functions with cutoff `y0`, always in floating point.
pub fn verify_pt_k_k_qt(t: f64, y0: usize, opts: &VerifyOptions) -> Result<VerificationReport> {
    let start = Instant::now();
    let k = kernel_k_matrix::<f64>(y0);
    let pg = expm(&build_g_matrix::<f64>(y0 + 1).matrix, t, opts.expm_tol)?;
    let qh = expm(&build_h_matrix_with::<f64>(y0, &opts.rates).matrix, t, opts.expm_tol)?;
    let residual = pg.mul(&k).sub(&k.mul(&qh));
    Ok(report("PtK=KQt", y0, Some(t), &residual, opts.tol, start))
}

fn lambda_identity<S: Scalar>(n: usize, opts: &VerifyOptions) -> VerificationReport {
    let start = Instant::now();
    let lambda = lambda_matrix::<S>(n);
    let coupled = build_coupled_generator_with::<S>(n, &opts.rates).matrix;
    let g = build_g_matrix::<S>(2 * n + 1).matrix;
    let residual = lambda.mul(&coupled).sub(&g.mul(&lambda));
    report("ΛG=GΛ", n, None, &residual, opts.tol, start)
}

/// `Λ 𝐆 = G Λ` on every basis element of `L_n`.
pub fn verify_lambda_intertwining(n: usize, opts: &VerifyOptions) -> VerificationReport {
    match opts.mode {
        Arithmetic::Exact => lambda_identity::<Rational>(n, opts),
        Arithmetic::Float => lambda_identity::<f64>(n, opts),
    }
}

fn psi_identity<S: Scalar>(y0: usize, opts: &VerifyOptions) -> VerificationReport {
    let start = Instant::now();
    let psi = psi_matrix::<S>(y0);
    let coupled = build_coupled_generator_with::<S>(y0, &opts.rates).matrix;
    let h = build_h_matrix_with::<S>(y0, &opts.rates).matrix;
    let residual = coupled.mul(&psi).sub(&psi.mul(&h));
    report("GΨ=ΨH", y0, None, &residual, opts.tol, start)
}

/// `𝐆 Ψ = Ψ H` on lattice functions with cutoff `y0`.
pub fn verify_psi_intertwining(y0: usize, opts: &VerifyOptions) -> VerificationReport {
    match opts.mode {
        Arithmetic::Exact => psi_identity::<Rational>(y0, opts),
        Arithmetic::Float => psi_identity::<f64>(y0, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_k_apply, lambda_apply, psi_lift, CoupledLayout};
    use crate::poly::{build_h_matrix, LatticeFunction};

    fn exact() -> VerifyOptions {
        VerifyOptions::default()
    }

    #[test]
    fn generator_identity_is_exact() {
        for y0 in 0..=12 {
            let r = verify_gk_kh(y0, &exact());
            assert!(r.pass, "{r:?}");
            assert_eq!(r.max_abs_residual, 0.0);
        }
    }

    #[test]
    fn generator_identity_in_float() {
        for y0 in 0..=20 {
            let r = verify_gk_kh(y0, &VerifyOptions::float(1e-12));
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn generator_identity_on_indicator() {
        let f = LatticeFunction::<Rational>::indicator(0, 0);
        let kf = kernel_k_apply(&f);
        let gkf = build_g_matrix::<Rational>(1).apply(kf.coeffs());
        let khf =
            kernel_k_apply(&LatticeFunction::from_vector(build_h_matrix::<Rational>(0).apply(&f.to_vector())).unwrap());
        assert_eq!(gkf, khf.into_coeffs());
        assert_eq!(gkf, vec![Rational::from_i64(-2), Rational::from_i64(2)]);
    }

    #[test]
    fn perturbed_rate_breaks_generator_identity() {
        let opts = VerifyOptions { rates: BirthRates::standard().with_override(1, 13), ..exact() };
        let r = verify_gk_kh(3, &opts);
        assert!(!r.pass);
        assert_eq!(r.max_abs_residual, 1.0);
        assert!(!verify_lambda_intertwining(2, &opts).pass);
    }

    #[test]
    fn semigroup_identity() {
        let opts = VerifyOptions::float(1e-10);
        let r = verify_pt_k_k_qt(0.0, 12, &opts).unwrap();
        assert_eq!(r.max_abs_residual, 0.0);
        for &t in &[0.01, 0.1, 1.0] {
            let r = verify_pt_k_k_qt(t, 12, &opts).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn semigroup_residual_grows_at_most_linearly() {
        let opts = VerifyOptions::float(1.0);
        let base = verify_pt_k_k_qt(1.0, 12, &opts).unwrap().max_abs_residual.max(1e-15);
        for &t in &[2.0, 3.0, 4.0, 5.0] {
            let r = verify_pt_k_k_qt(t, 12, &opts).unwrap();
            assert!(r.max_abs_residual <= 4.0 * t * base.max(1e-13), "t={t}: {}", r.max_abs_residual);
        }
    }

    #[test]
    fn semigroup_identity_on_indicator_closed_form() {
        let opts = VerifyOptions::float(1e-14);
        let t = 0.5;
        let pg = expm(&build_g_matrix::<f64>(1).matrix, t, 1e-15).unwrap();
        let kf = kernel_k_apply(&LatticeFunction::<f64>::indicator(0, 0));
        let lhs = pg.mul_vec(kf.coeffs());
        let e = (-1.0f64).exp();
        assert!((lhs[0] - e).abs() < 1e-15 && (lhs[1] + e).abs() < 1e-15);
        assert!(verify_pt_k_k_qt(t, 0, &opts).unwrap().pass);
    }

    #[test]
    fn coupled_identities_are_exact() {
        for n in 0..=8 {
            let r = verify_lambda_intertwining(n, &exact());
            assert!(r.pass, "{r:?}");
            let r = verify_psi_intertwining(n, &exact());
            assert!(r.pass, "{r:?}");
        }
        assert!(verify_psi_intertwining(10, &exact()).pass);
    }

    #[test]
    fn lambda_identity_on_indicator() {
        let f = psi_lift(&LatticeFunction::<Rational>::indicator(0, 0), 0);
        let lf = lambda_apply(&f);
        let glf = build_g_matrix::<Rational>(1).apply(lf.coeffs());
        assert_eq!(glf, vec![Rational::from_i64(-2), Rational::from_i64(2)]);
    }

    #[test]
    fn psi_restriction_reproduces_h() {
        for y0 in 0..=6 {
            let layout = CoupledLayout::new(y0);
            let coupled = build_coupled_generator_with::<Rational>(y0, &BirthRates::standard());
            let psi = psi_matrix::<Rational>(y0);
            let restricted = coupled.matrix.mul(&psi);
            let h = build_h_matrix::<Rational>(y0).matrix;
            for (j, col) in (0..y0 + 2).map(|j| (j, h.column(j))) {
                for (y, expected) in col.iter().enumerate().take(y0 + 1) {
                    assert_eq!(restricted.get(layout.index(y, 0), j), expected);
                }
                assert_eq!(restricted.get(layout.tail(), j), &col[y0 + 1]);
            }
        }
    }

    #[test]
    fn float_coupled_identities() {
        let opts = VerifyOptions::float(1e-9);
        for n in 0..=6 {
            assert!(verify_lambda_intertwining(n, &opts).pass);
            assert!(verify_psi_intertwining(n, &opts).pass);
        }
    }
}
