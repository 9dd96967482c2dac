//! Scaling-and-squaring matrix exponential for small dense matrices.
//!
//! `exp(tA)` is computed as `(T_m(tA / 2^s))^{2^s}` where `T_m` is the Taylor
//! polynomial of degree `m`. The squaring depth `s` brings `‖tA‖₁ / 2^s` below
//! [`THETA`]; the degree is then grown until the remainder bound
//! `‖term‖ θ / (m + 2 - θ)` falls under `tol / 2^s` (or under rounding level).

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

const THETA: f64 = 0.5;
const MAX_TERMS: usize = 64;

pub fn expm(a: &Matrix<f64>, t: f64, tol: f64) -> Result<Matrix<f64>> {
    if !a.is_square() {
        return Err(invalid("matrix exponential of a non-square matrix"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("exponential time must be finite and >= 0, got {t}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(invalid(format!("exponential tolerance must be > 0, got {tol}")));
    }
    if !a.is_finite() {
        return Err(Error::NumericFailure("non-finite generator entries".into()));
    }
    let n = a.rows();
    if t == 0.0 {
        return Ok(Matrix::identity(n));
    }

    let norm = a.norm1() * t;
    if !norm.is_finite() {
        return Err(Error::NumericFailure(format!("‖tA‖₁ overflowed at t={t}")));
    }
    let squarings = if norm > THETA { (norm / THETA).log2().ceil() as i32 } else { 0 };
    let factor = t * 2f64.powi(-squarings);
    let scaled = a.scale(&factor);
    let theta = norm * 2f64.powi(-squarings);
    let target = tol * 2f64.powi(-squarings);

    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=MAX_TERMS {
        term = term.mul(&scaled);
        let inv_k = 1.0 / k as f64;
        term.data_mut().iter_mut().for_each(|v| *v *= inv_k);
        for (s, t) in sum.data_mut().iter_mut().zip(term.data()) {
            *s += t;
        }
        let term_norm = term.norm1();
        let remainder = term_norm * theta / (k as f64 + 2.0 - theta);
        if remainder <= target || term_norm <= 0.25 * f64::EPSILON * sum.norm1() {
            break;
        }
    }

    for _ in 0..squarings {
        sum = sum.mul(&sum);
    }
    if !sum.is_finite() {
        return Err(Error::NumericFailure(format!("matrix exponential produced non-finite entries at t={t}")));
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scalar_exponential() {
        let a = Matrix::from_rows(vec![vec![-3.0]]);
        for &t in &[0.1, 1.0, 7.0] {
            let e = expm(&a, t, 1e-15).unwrap();
            assert_abs_diff_eq!(*e.get(0, 0), (-3.0 * t).exp(), epsilon = 1e-15);
        }
    }

    #[test]
    fn nilpotent_jordan_block() {
        // exp(tN) = I + tN + t^2 N^2 / 2 for a 3x3 shift.
        let a = Matrix::from_rows(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]]);
        let e = expm(&a, 2.0, 1e-15).unwrap();
        assert_abs_diff_eq!(*e.get(0, 1), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(*e.get(0, 2), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(*e.get(1, 0), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        let a = Matrix::from_rows(vec![vec![1.0, 0.0]]);
        assert!(expm(&a, 1.0, 1e-12).is_err());
        let sq = Matrix::<f64>::identity(2);
        assert!(expm(&sq, -1.0, 1e-12).is_err());
        assert!(expm(&sq, 1.0, 0.0).is_err());
        let bad = Matrix::from_rows(vec![vec![f64::NAN]]);
        assert!(matches!(expm(&bad, 1.0, 1e-12), Err(Error::NumericFailure(_))));
        let huge = Matrix::from_rows(vec![vec![800.0]]);
        assert!(matches!(expm(&huge, 1.0, 1e-12), Err(Error::NumericFailure(_))));
    }
}
