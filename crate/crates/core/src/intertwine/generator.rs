use crate::kernels::{CoupledFunction, CoupledLayout};
use crate::matrix::Matrix;
use crate::poly::{BasisTag, BirthRates, EvenPolynomial, GeneratorMatrix, Level};
use crate::scalar::Scalar;

/// The coupled generator on the coordinates of `L_n` with the standard rates.
pub fn build_coupled_generator<S: Scalar>(n: usize) -> GeneratorMatrix<S> {
    build_coupled_generator_with(n, &BirthRates::standard())
}

/// The coupled generator
/// `λ_y (f(x,y+1) - f(x,y)) + (1-x²) ∂²f + 4 (y/x - (y+1) x) ∂f`
/// on `L_n`, column `(y, k)` being the image of `x^{2k}` placed at level `y`.
///
/// The singular term `(4y/x) ∂ x^{2k} = 8ky x^{2k-2}` is applied on
/// coefficients, so no limit at `x = 0` is ever taken numerically.
/// Levels above `n` hold the constant tail, so level `n` jumps into the
/// tail coordinate.
pub fn build_coupled_generator_with<S: Scalar>(n: usize, rates: &BirthRates) -> GeneratorMatrix<S> {
    let layout = CoupledLayout::new(n);
    let mut m = Matrix::zeros(layout.dim(), layout.dim());
    for y in 0..=n {
        let lambda = S::from_u64(rates.rate(y as u64));
        for k in 0..=n {
            let col = layout.index(y, k);
            if k >= 1 {
                let (k64, y64) = (k as u64, y as u64);
                let diffusion = 2 * k64 * (2 * k64 - 1);
                m.add_to(layout.index(y, k - 1), col, S::from_u64(diffusion + 8 * k64 * y64));
                m.add_to(col, col, -S::from_u64(diffusion + 8 * k64 * (y64 + 1)));
            }
            // jump term λ_y (f(·, y+1) - f(·, y)) lands in row (y, k)
            m.add_to(col, col, -lambda.clone());
            if y < n {
                m.add_to(col, layout.index(y + 1, k), lambda.clone());
            } else if k == 0 {
                m.add_to(col, layout.tail(), lambda.clone());
            }
        }
    }
    GeneratorMatrix { matrix: m, basis: BasisTag::Coupled { n } }
}

/// Applies the coupled generator to a domain element and returns the result
/// as a coupled function on `L_m`, `m = max(cutoff, degree bound)`.
pub fn apply_coupled_generator<S: Scalar>(
    f: &CoupledFunction<S>,
    rates: &BirthRates,
) -> crate::Result<CoupledFunction<S>> {
    let m = f.cutoff().max(f.degree_bound());
    let v = f.to_coefficients(m)?;
    let g = build_coupled_generator_with::<S>(m, rates);
    CoupledFunction::from_coefficients(m, &g.apply(&v))
}

/// Pointwise value of the coupled generator applied to `f`.
pub fn coupled_generator_at(f: &CoupledFunction<f64>, rates: &BirthRates, x: f64, y: Level) -> crate::Result<f64> {
    Ok(apply_coupled_generator(f, rates)?.evaluate(x, y))
}

/// `x^{2k}` at level `y` in `L_n`, zero elsewhere.
pub fn coupled_monomial<S: Scalar>(n: usize, y: usize, k: usize) -> CoupledFunction<S> {
    let levels =
        (0..=n).map(|l| if l == y { EvenPolynomial::monomial(k, n) } else { EvenPolynomial::zero(n) }).collect();
    CoupledFunction::new(levels, S::zero()).expect("n + 1 levels")
}
