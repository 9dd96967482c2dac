//! The link kernel `K(x, ·)` from `[0,1]` to `{0, 1, ..., ∞}` and the kernels
//! `Λ`, `Φ`, `Ψ` relating the coupled process to its two margins.
//!
//! For `x < 1`, `K(x, ·)` is geometric with success parameter `1 - x²`:
//! `K(x, y) = (1 - x²) x^{2y}`. For `x = 1` all mass sits at `∞`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::poly::{EvenPolynomial, LatticeFunction, Level};
use crate::scalar::Scalar;

fn check_unit(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid(format!("kernel argument x={x} outside [0, 1]")));
    }
    Ok(())
}

/// `K(x, y)`.
pub fn kernel_k_eval(x: f64, y: Level) -> Result<f64> {
    check_unit(x)?;
    Ok(match y {
        Level::Infinite => f64::from(u8::from(x == 1.0)),
        Level::Finite(_) if x == 1.0 => 0.0,
        Level::Finite(y) => (1.0 - x * x) * geometric_tail(x, y),
    })
}

/// `K(x, {y' >= y}) = x^{2y}` for `x < 1`.
pub fn geometric_tail(x: f64, y: u64) -> f64 {
    if y <= i32::MAX as u64 / 2 {
        (x * x).powi(y as i32)
    } else {
        (2.0 * y as f64 * x.ln()).exp()
    }
}

/// `K f` as an even polynomial: `f(0) + Σ_{y>=1} x^{2y} (f(y) - f(y-1))`.
///
/// With cutoff `y0` the lattice function has `f(y0 + 1) = f(∞)`, so the result
/// carries degree bound `y0 + 1` and takes the value `f(∞)` at `x = 1`.
pub fn kernel_k_apply<S: Scalar>(f: &LatticeFunction<S>) -> EvenPolynomial<S> {
    let v = f.to_vector();
    let mut coeffs = Vec::with_capacity(v.len());
    coeffs.push(v[0].clone());
    for w in v.windows(2) {
        coeffs.push(w[1].clone() - w[0].clone());
    }
    EvenPolynomial::new(coeffs).expect("lattice vectors are never empty")
}

/// Matrix of [`kernel_k_apply`] from lattice coordinates (cutoff `y0`) to
/// even-polynomial coefficients of degree bound `y0 + 1`.
pub fn kernel_k_matrix<S: Scalar>(y0: usize) -> Matrix<S> {
    let dim = y0 + 2;
    let mut m = Matrix::zeros(dim, dim);
    for j in 0..dim {
        m.set(j, j, S::one());
        if j + 1 < dim {
            m.set(j + 1, j, -S::one());
        }
    }
    m
}

/// Draws from `K(x, ·)` by inversion: `floor(ln U / ln x²)`.
pub fn sample_k<R: Rng + ?Sized>(x: f64, rng: &mut R) -> Result<Level> {
    check_unit(x)?;
    if x == 1.0 {
        return Ok(Level::Infinite);
    }
    if x == 0.0 {
        return Ok(Level::Finite(0));
    }
    // U in (0, 1]
    let u = 1.0 - rng.random::<f64>();
    let log_x2 = 2.0 * (x - 1.0).ln_1p();
    Ok(Level::Finite((u.ln() / log_x2).floor() as u64))
}

/// What a coupled function does on levels beyond its last stored level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Beyond<S> {
    /// `f(·, y) = c` for every `y > y0`, and `f(1, ∞) = c`: an element of the
    /// coupled generator's domain.
    Constant(S),
    /// `f(·, y) = f(·, y0)` for every `y > y0`; the shape of `Φ p`.
    RepeatLast,
}

/// A function on the coupled state space with even-polynomial levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledFunction<S = f64> {
    levels: Vec<EvenPolynomial<S>>,
    beyond: Beyond<S>,
}

impl<S: Scalar> CoupledFunction<S> {
    /// Domain element with the given levels and constant value `tail` beyond them.
    pub fn new(levels: Vec<EvenPolynomial<S>>, tail: S) -> Result<Self> {
        Self::build(levels, Beyond::Constant(tail))
    }

    /// Function whose last level repeats forever.
    pub fn repeating(levels: Vec<EvenPolynomial<S>>) -> Result<Self> {
        Self::build(levels, Beyond::RepeatLast)
    }

    fn build(levels: Vec<EvenPolynomial<S>>, beyond: Beyond<S>) -> Result<Self> {
        if levels.is_empty() {
            return Err(invalid("coupled function needs at least level 0"));
        }
        let n = levels.iter().map(EvenPolynomial::degree_bound).max().unwrap_or(0);
        let levels = levels.into_iter().map(|p| p.padded(n)).collect::<Result<Vec<_>>>()?;
        Ok(CoupledFunction { levels, beyond })
    }

    pub fn constant(c: S) -> Self {
        CoupledFunction { levels: vec![EvenPolynomial::constant(c.clone())], beyond: Beyond::Constant(c) }
    }

    /// Last stored level `y0`.
    pub fn cutoff(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn degree_bound(&self) -> usize {
        self.levels[0].degree_bound()
    }

    pub fn levels(&self) -> &[EvenPolynomial<S>] {
        &self.levels
    }

    pub fn beyond(&self) -> &Beyond<S> {
        &self.beyond
    }

    pub fn in_domain(&self) -> bool {
        matches!(self.beyond, Beyond::Constant(_))
    }

    /// Value at the compactification point `(1, ∞)`.
    pub fn tail(&self) -> S {
        match &self.beyond {
            Beyond::Constant(c) => c.clone(),
            Beyond::RepeatLast => self.levels[self.cutoff()].value_at_one(),
        }
    }

    /// Level `y` as a polynomial (levels past the cutoff materialized).
    pub fn level(&self, y: u64) -> EvenPolynomial<S> {
        match (self.levels.get(y as usize), &self.beyond) {
            (Some(p), _) => p.clone(),
            (None, Beyond::Constant(c)) => EvenPolynomial::constant(c.clone()),
            (None, Beyond::RepeatLast) => self.levels[self.cutoff()].clone(),
        }
    }

    pub fn evaluate(&self, x: f64, y: Level) -> f64 {
        match y {
            Level::Infinite => self.tail().to_f64(),
            Level::Finite(y) => match (self.levels.get(y as usize), &self.beyond) {
                (Some(p), _) => p.evaluate(x),
                (None, Beyond::Constant(c)) => c.to_f64(),
                (None, Beyond::RepeatLast) => self.levels[self.cutoff()].evaluate(x),
            },
        }
    }

    /// Domain element that agrees with `self` on levels `0..=cutoff` and is
    /// constant `tail()` beyond.
    pub fn truncate_to_domain(&self) -> Self {
        CoupledFunction { levels: self.levels.clone(), beyond: Beyond::Constant(self.tail()) }
    }

    /// Coordinates in `L_n`: `c_{y,k}` at `y (n+1) + k`, then the tail.
    pub fn to_coefficients(&self, n: usize) -> Result<Vec<S>> {
        let Beyond::Constant(tail) = &self.beyond else {
            return Err(Error::NotInDomain("levels repeat beyond the cutoff; truncate first".into()));
        };
        if self.cutoff() > n || self.degree_bound() > n {
            return Err(invalid(format!(
                "coupled function with cutoff {} and degree bound {} does not fit in L_{n}",
                self.cutoff(),
                self.degree_bound()
            )));
        }
        let layout = CoupledLayout::new(n);
        let mut v = vec![S::zero(); layout.dim()];
        for y in 0..=n {
            if let Some(p) = self.levels.get(y) {
                for (k, c) in p.coeffs().iter().enumerate() {
                    v[layout.index(y, k)] = c.clone();
                }
            } else {
                v[layout.index(y, 0)] = tail.clone();
            }
        }
        v[layout.tail()] = tail.clone();
        Ok(v)
    }

    pub fn from_coefficients(n: usize, v: &[S]) -> Result<Self> {
        let layout = CoupledLayout::new(n);
        if v.len() != layout.dim() {
            return Err(invalid(format!("L_{n} coordinates have length {}, got {}", layout.dim(), v.len())));
        }
        let levels = (0..=n)
            .map(|y| EvenPolynomial::new(v[layout.index(y, 0)..=layout.index(y, n)].to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels, v[layout.tail()].clone())
    }

    pub fn to_f64(&self) -> CoupledFunction<f64> {
        CoupledFunction {
            levels: self.levels.iter().map(EvenPolynomial::to_f64).collect(),
            beyond: match &self.beyond {
                Beyond::Constant(c) => Beyond::Constant(c.to_f64()),
                Beyond::RepeatLast => Beyond::RepeatLast,
            },
        }
    }
}

/// Index bookkeeping for the coordinates of `L_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoupledLayout {
    pub n: usize,
}

impl CoupledLayout {
    pub fn new(n: usize) -> Self {
        CoupledLayout { n }
    }

    pub fn dim(&self) -> usize {
        (self.n + 1) * (self.n + 1) + 1
    }

    pub fn index(&self, y: usize, k: usize) -> usize {
        debug_assert!(y <= self.n && k <= self.n);
        y * (self.n + 1) + k
    }

    pub fn tail(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }
}

/// `Λ f(x) = Σ_{y ∈ ℕ̄} K(x, y) f(x, y)`, expanded exactly in even monomials.
///
/// The result has degree bound `n + y0 + 1`.
pub fn lambda_apply<S: Scalar>(f: &CoupledFunction<S>) -> EvenPolynomial<S> {
    let y0 = f.cutoff();
    let n = f.degree_bound();
    let mut out = vec![S::zero(); n + y0 + 2];
    // K(·, y) = x^{2y} - x^{2y+2}
    let mut add_shifted = |p: &EvenPolynomial<S>, shift: usize, sign_negative: bool| {
        for (k, c) in p.coeffs().iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let cur = std::mem::replace(&mut out[k + shift], S::zero());
            out[k + shift] = if sign_negative { cur - c.clone() } else { cur + c.clone() };
        }
    };
    match f.beyond() {
        Beyond::Constant(c) => {
            let shift_c = EvenPolynomial::constant(c.clone());
            for (y, p) in f.levels().iter().enumerate() {
                let centered = p.add(&shift_c.scale(&-S::one()));
                add_shifted(&centered, y, false);
                add_shifted(&centered, y + 1, true);
            }
            add_shifted(&shift_c, 0, false);
        }
        Beyond::RepeatLast => {
            for (y, p) in f.levels().iter().enumerate() {
                add_shifted(p, y, false);
                if y < y0 {
                    add_shifted(p, y + 1, true);
                }
            }
        }
    }
    EvenPolynomial::new(out).expect("nonempty")
}

/// Matrix of `Λ` from `L_n` coordinates to even-polynomial coefficients of degree bound `2n + 1`.
pub fn lambda_matrix<S: Scalar>(n: usize) -> Matrix<S> {
    let layout = CoupledLayout::new(n);
    let mut m = Matrix::zeros(2 * n + 2, layout.dim());
    for j in 0..layout.dim() {
        let mut e = vec![S::zero(); layout.dim()];
        e[j] = S::one();
        let f = CoupledFunction::from_coefficients(n, &e).expect("basis vector has the right length");
        for (i, c) in lambda_apply(&f).into_coeffs().into_iter().enumerate() {
            m.set(i, j, c);
        }
    }
    m
}

/// `Ψ g (x, y) = g(y)`, carried with degree bound `n` on every level.
pub fn psi_lift<S: Scalar>(g: &LatticeFunction<S>, n: usize) -> CoupledFunction<S> {
    let levels =
        g.values().iter().map(|v| EvenPolynomial::constant(v.clone()).padded(n).expect("constant fits")).collect();
    CoupledFunction { levels, beyond: Beyond::Constant(g.tail().clone()) }
}

/// `Φ p (x, y) = p(x)`; `y0 + 1` levels are stored and the last one repeats.
pub fn phi_lift<S: Scalar>(p: &EvenPolynomial<S>, y0: usize) -> CoupledFunction<S> {
    CoupledFunction { levels: vec![p.clone(); y0 + 1], beyond: Beyond::RepeatLast }
}

/// Matrix of `Ψ` from lattice coordinates (cutoff `y0`) into `L_{y0}`.
pub fn psi_matrix<S: Scalar>(y0: usize) -> Matrix<S> {
    let layout = CoupledLayout::new(y0);
    let mut m = Matrix::zeros(layout.dim(), y0 + 2);
    for y in 0..=y0 {
        m.set(layout.index(y, 0), y, S::one());
    }
    m.set(layout.tail(), y0 + 1, S::one());
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn r(v: i64) -> Rational {
        <Rational as Scalar>::from_i64(v)
    }

    #[test]
    fn k_eval_examples() {
        assert_eq!(kernel_k_eval(0.0, Level::Finite(0)).unwrap(), 1.0);
        assert_eq!(kernel_k_eval(1.0, Level::Infinite).unwrap(), 1.0);
        assert_eq!(kernel_k_eval(1.0, Level::Finite(3)).unwrap(), 0.0);
        assert_eq!(kernel_k_eval(0.5, Level::Infinite).unwrap(), 0.0);
        assert_abs_diff_eq!(kernel_k_eval(0.5, Level::Finite(1)).unwrap(), 0.1875, epsilon = 1e-16);
        assert!(kernel_k_eval(1.5, Level::Finite(0)).is_err());
        assert!(kernel_k_eval(-0.1, Level::Finite(0)).is_err());
    }

    #[test]
    fn k_rows_are_normalized() {
        let cap = 40u64;
        for i in 0..1000 {
            let x = i as f64 / 999.0;
            let head: f64 = (0..=cap).map(|y| kernel_k_eval(x, Level::Finite(y)).unwrap()).sum();
            // mass of {cap+1, cap+2, ...} in closed form, plus the atom at ∞
            let rest = if x < 1.0 { geometric_tail(x, cap + 1) } else { 0.0 };
            let total = head + rest + kernel_k_eval(x, Level::Infinite).unwrap();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn k_apply_examples() {
        let one = LatticeFunction::constant(r(1), 3);
        let p = kernel_k_apply(&one);
        assert_eq!(p.coeffs()[0], r(1));
        assert!(p.coeffs()[1..].iter().all(num_traits::Zero::is_zero));

        let ind0 = LatticeFunction::<Rational>::indicator(0, 0);
        assert_eq!(kernel_k_apply(&ind0).coeffs(), &[r(1), r(-1)]);

        let step = LatticeFunction::new(vec![r(0)], r(1)).unwrap();
        assert_eq!(kernel_k_apply(&step).coeffs(), &[r(0), r(1)]);
    }

    #[test]
    fn k_apply_at_one_is_tail_exactly() {
        let f = LatticeFunction::new(vec![r(3), r(-2), r(7), r(5)], r(11)).unwrap();
        assert_eq!(kernel_k_apply(&f).value_at_one(), r(11));
    }

    #[test]
    fn k_matrix_matches_apply() {
        let y0 = 5;
        let m = kernel_k_matrix::<Rational>(y0);
        let f = LatticeFunction::new((0..=y0 as i64).map(|v| r(v * v - 3)).collect(), r(4)).unwrap();
        assert_eq!(m.mul_vec(&f.to_vector()), kernel_k_apply(&f).into_coeffs());
    }

    #[test]
    fn sample_k_degenerate_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_k(0.0, &mut rng).unwrap(), Level::Finite(0));
            assert_eq!(sample_k(1.0, &mut rng).unwrap(), Level::Infinite);
        }
        assert!(sample_k(2.0, &mut rng).is_err());
    }

    #[test]
    fn sample_k_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_k(0.5, &mut rng).unwrap().finite().unwrap() as f64).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        // geometric with p = 3/4: mean 1/3, variance (1-p)/p^2 = 4/9
        let se = (4.0f64 / 9.0 / n as f64).sqrt();
        assert!((mean - 1.0 / 3.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn sample_k_chi_square() {
        for (seed, &x) in [0.3f64, 0.7].iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed as u64);
            let n = 100_000usize;
            let mut counts = vec![0usize; 64];
            for _ in 0..n {
                let y = sample_k(x, &mut rng).unwrap().finite().unwrap() as usize;
                counts[y.min(63)] += 1;
            }
            // pool cells so that every expected count is at least 5
            let mut stat = 0.0;
            let mut cells = 0;
            let mut obs_acc = 0.0;
            let mut exp_acc = 0.0;
            for y in 0..63u64 {
                obs_acc += counts[y as usize] as f64;
                exp_acc += n as f64 * kernel_k_eval(x, Level::Finite(y)).unwrap();
                let remaining = n as f64 * geometric_tail(x, y + 1);
                if exp_acc >= 5.0 && remaining >= 5.0 {
                    stat += (obs_acc - exp_acc).powi(2) / exp_acc;
                    cells += 1;
                    obs_acc = 0.0;
                    exp_acc = 0.0;
                }
            }
            let obs_rest: f64 = obs_acc + counts[63] as f64;
            let exp_rest = exp_acc + n as f64 * geometric_tail(x, 63);
            stat += (obs_rest - exp_rest).powi(2) / exp_rest;
            cells += 1;
            let crit = ChiSquared::new((cells - 1) as f64).unwrap().inverse_cdf(1.0 - 1e-3);
            assert!(stat < crit, "x={x}: chi2={stat} crit={crit} cells={cells}");
        }
    }

    #[test]
    fn lambda_examples() {
        // ΛΦ g = g
        let g = EvenPolynomial::new(vec![r(2), r(-3), r(5)]).unwrap();
        for y0 in 0..4 {
            assert_eq!(lambda_apply(&phi_lift(&g, y0)).coeffs()[..3], g.coeffs()[..]);
            assert!(lambda_apply(&phi_lift(&g, y0)).coeffs()[3..].iter().all(num_traits::Zero::is_zero));
        }
        // Λ Ψ 1_{0} = K(·, 0) = 1 - x^2
        let f = psi_lift(&LatticeFunction::<Rational>::indicator(0, 0), 2);
        let l = lambda_apply(&f);
        assert_eq!(&l.coeffs()[..2], &[r(1), r(-1)]);
        assert!(l.coeffs()[2..].iter().all(num_traits::Zero::is_zero));
        // constants
        let c = CoupledFunction::constant(r(4));
        assert_eq!(lambda_apply(&c).coeffs()[0], r(4));
    }

    #[test]
    fn lambda_phi_is_identity_up_to_degree_24() {
        for n in 0..=12 {
            let coeffs: Vec<Rational> = (0..=n as i64).map(|k| r((k * 37 % 11) - 5)).collect();
            let p = EvenPolynomial::new(coeffs).unwrap();
            let l = lambda_apply(&phi_lift(&p, 3));
            assert_eq!(l.padded(l.degree_bound()).unwrap().coeffs()[..=n], p.coeffs()[..]);
            assert!(l.coeffs()[n + 1..].iter().all(num_traits::Zero::is_zero));
        }
    }

    #[test]
    fn lifts() {
        let c = LatticeFunction::constant(r(3), 2);
        let f = psi_lift(&c, 1);
        assert!(f.levels().iter().all(|p| p.coeffs() == [r(3), r(0)]));
        assert_eq!(f.tail(), r(3));

        let x2 = EvenPolynomial::<f64>::monomial(1, 1);
        let f = phi_lift(&x2, 4);
        assert!(f.levels().iter().all(|p| p == &x2));
        assert_eq!(f.tail(), 1.0);
        assert_eq!(f.evaluate(0.5, Level::Finite(100)), 0.25);
        assert!(!f.in_domain());
        assert!(matches!(f.to_coefficients(4), Err(Error::NotInDomain(_))));
        let t = f.truncate_to_domain();
        assert_eq!(t.evaluate(0.5, Level::Finite(100)), 1.0);

        let ind = psi_lift(&LatticeFunction::<f64>::indicator(0, 0), 0);
        assert_eq!(ind.evaluate(0.4, Level::Finite(1)), 0.0);
        assert_eq!(ind.evaluate(0.4, Level::Finite(0)), 1.0);
    }

    #[test]
    fn coefficient_round_trip() {
        let f = CoupledFunction::new(
            vec![EvenPolynomial::new(vec![1.0, 2.0]).unwrap(), EvenPolynomial::new(vec![-1.0]).unwrap()],
            0.5,
        )
        .unwrap();
        let v = f.to_coefficients(3).unwrap();
        let g = CoupledFunction::from_coefficients(3, &v).unwrap();
        for &x in &[0.0, 0.3, 1.0] {
            for y in 0..6 {
                assert_eq!(f.evaluate(x, Level::Finite(y)), g.evaluate(x, Level::Finite(y)));
            }
        }
        assert!(f.to_coefficients(0).is_err());
    }

    #[test]
    fn psi_matrix_matches_lift() {
        let y0 = 3;
        let g = LatticeFunction::new(vec![r(1), r(-4), r(2), r(9)], r(-7)).unwrap();
        let direct = psi_lift(&g, y0).to_coefficients(y0).unwrap();
        assert_eq!(psi_matrix::<Rational>(y0).mul_vec(&g.to_vector()), direct);
    }

    proptest! {
        #[test]
        fn k_apply_matches_direct_sum(
            values in proptest::collection::vec(-5.0f64..5.0, 1..=11),
            tail in -5.0f64..5.0,
            x in 0.0f64..1.0,
        ) {
            let f = LatticeFunction::new(values, tail).unwrap();
            let poly = kernel_k_apply(&f).evaluate(x);
            let y0 = f.cutoff() as u64;
            let mut direct = 0.0;
            for y in 0..=y0 {
                direct += kernel_k_eval(x, Level::Finite(y)).unwrap() * f.value(Level::Finite(y));
            }
            direct += geometric_tail(x, y0 + 1) * tail;
            prop_assert!((poly - direct).abs() <= 1e-12);
        }
    }
}
