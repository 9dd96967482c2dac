//! Finite-dimensional carriers for the Wright-Fisher generator `G` and the
//! birth generator `H`, plus their semigroups on the invariant subspaces.
//!
//! `G f = (1 - x^2) f''` maps even polynomials of degree at most `2n` into
//! themselves, and `H f(y) = λ_y (f(y+1) - f(y))` maps lattice functions that
//! are constant beyond a cutoff into themselves. Restricted to these subspaces
//! both generators are exact square matrices, so the semigroups are plain
//! matrix exponentials with no truncation error.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::expm::expm;
use crate::matrix::Matrix;
use crate::scalar::{Arithmetic, Scalar};

/// Largest even-polynomial degree index `n` accepted by the float semigroup.
///
/// The monomial basis is acceptably conditioned up to about 30; exact mode has no cap.
pub const FLOAT_DEGREE_CAP: usize = 24;

/// Default tolerance handed to the matrix exponential.
pub const DEFAULT_EXPM_TOL: f64 = 1e-15;

/// A point of the one-point compactified lattice `{0, 1, 2, ..., ∞}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Finite(u64),
    Infinite,
}

impl Level {
    pub fn finite(self) -> Option<u64> {
        match self {
            Level::Finite(y) => Some(y),
            Level::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Level::Infinite)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Finite(y) => write!(f, "{y}"),
            Level::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Level::Infinite),
            other => other.parse::<u64>().map(Level::Finite).map_err(|e| format!("bad level `{other}`: {e}")),
        }
    }
}

/// Birth rate `λ_y = (2y+1)(2y+2)` of the explosive pure birth process.
pub fn birth_rate(y: u64) -> u64 {
    (2 * y + 1) * (2 * y + 2)
}

/// Signed entry point for callers that parse levels from user input.
pub fn checked_birth_rate(y: i64) -> Result<u64> {
    if y < 0 {
        return Err(invalid(format!("birth rate requested for negative level {y}")));
    }
    Ok(birth_rate(y as u64))
}

/// The table of birth rates used when assembling `H` and the coupled generator.
///
/// Normally the standard `(2y+1)(2y+2)`; individual levels can be overridden so
/// that verifiers can be exercised against a deliberately wrong process.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BirthRates {
    overrides: BTreeMap<u64, u64>,
}

impl BirthRates {
    pub fn standard() -> Self {
        Self::default()
    }

    pub fn with_override(mut self, y: u64, rate: u64) -> Self {
        self.overrides.insert(y, rate);
        self
    }

    pub fn rate(&self, y: u64) -> u64 {
        self.overrides.get(&y).copied().unwrap_or_else(|| birth_rate(y))
    }

    pub fn is_standard(&self) -> bool {
        self.overrides.iter().all(|(&y, &r)| birth_rate(y) == r)
    }
}

/// Even polynomial `Σ_k c_k x^{2k}` with `k = 0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvenPolynomial<S = f64> {
    coeffs: Vec<S>,
}

impl<S: Scalar> EvenPolynomial<S> {
    pub fn new(coeffs: Vec<S>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("even polynomial needs at least the constant coefficient"));
        }
        Ok(EvenPolynomial { coeffs })
    }

    pub fn zero(n: usize) -> Self {
        EvenPolynomial { coeffs: vec![S::zero(); n + 1] }
    }

    pub fn constant(c: S) -> Self {
        EvenPolynomial { coeffs: vec![c] }
    }

    /// `x^{2k}` carried with degree bound `n >= k`.
    pub fn monomial(k: usize, n: usize) -> Self {
        let mut p = Self::zero(n.max(k));
        p.coeffs[k] = S::one();
        p
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<S> {
        self.coeffs
    }

    /// The index `n` such that the polynomial lives in `L_n`.
    pub fn degree_bound(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let u = x * x;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c.to_f64())
    }

    /// Exact value at `x = 1`, the sum of the coefficients.
    pub fn value_at_one(&self) -> S {
        self.coeffs.iter().cloned().fold(S::zero(), |a, b| a + b)
    }

    /// Same polynomial carried with a larger degree bound.
    pub fn padded(&self, n: usize) -> Result<Self> {
        if n < self.degree_bound() {
            return Err(invalid(format!("cannot carry a degree-bound {} polynomial in L_{n}", self.degree_bound())));
        }
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(n + 1, S::zero());
        Ok(EvenPolynomial { coeffs })
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.degree_bound().max(other.degree_bound());
        let coeffs = (0..=n)
            .map(|k| {
                let a = self.coeffs.get(k).cloned().unwrap_or_else(S::zero);
                let b = other.coeffs.get(k).cloned().unwrap_or_else(S::zero);
                a + b
            })
            .collect();
        EvenPolynomial { coeffs }
    }

    pub fn scale(&self, s: &S) -> Self {
        EvenPolynomial { coeffs: self.coeffs.iter().map(|c| c.clone() * s.clone()).collect() }
    }

    /// Product of two even polynomials; degree bounds add.
    pub fn mul(&self, other: &Self) -> Self {
        let mut coeffs = vec![S::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                let cur = std::mem::replace(&mut coeffs[i + j], S::zero());
                coeffs[i + j] = cur + a.clone() * b.clone();
            }
        }
        EvenPolynomial { coeffs }
    }

    pub fn to_f64(&self) -> EvenPolynomial<f64> {
        EvenPolynomial { coeffs: self.coeffs.iter().map(Scalar::to_f64).collect() }
    }
}

/// Function on `{0, 1, ..., ∞}` that is constant (equal to `tail`) beyond `cutoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeFunction<S = f64> {
    values: Vec<S>,
    tail: S,
}

impl<S: Scalar> LatticeFunction<S> {
    pub fn new(values: Vec<S>, tail: S) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("lattice function needs at least the value at 0"));
        }
        Ok(LatticeFunction { values, tail })
    }

    pub fn constant(c: S, cutoff: usize) -> Self {
        LatticeFunction { values: vec![c.clone(); cutoff + 1], tail: c }
    }

    /// Indicator of the single level `y`, represented with cutoff `cutoff >= y`.
    pub fn indicator(y: usize, cutoff: usize) -> Self {
        let mut values = vec![S::zero(); cutoff.max(y) + 1];
        values[y] = S::one();
        LatticeFunction { values, tail: S::zero() }
    }

    /// Coordinates `(f(0), ..., f(y0), f(∞))`.
    pub fn from_vector(mut v: Vec<S>) -> Result<Self> {
        if v.len() < 2 {
            return Err(invalid("lattice vector needs f(0) and f(∞)"));
        }
        let tail = v.pop().expect("length checked");
        Ok(LatticeFunction { values: v, tail })
    }

    pub fn to_vector(&self) -> Vec<S> {
        let mut v = self.values.clone();
        v.push(self.tail.clone());
        v
    }

    pub fn cutoff(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn tail(&self) -> &S {
        &self.tail
    }

    pub fn value(&self, level: Level) -> S {
        match level {
            Level::Finite(y) => self.values.get(y as usize).cloned().unwrap_or_else(|| self.tail.clone()),
            Level::Infinite => self.tail.clone(),
        }
    }

    /// Same function represented with a larger cutoff.
    pub fn extended(&self, cutoff: usize) -> Result<Self> {
        if cutoff < self.cutoff() {
            return Err(invalid(format!("cannot shrink lattice cutoff from {} to {cutoff}", self.cutoff())));
        }
        let mut values = self.values.clone();
        values.resize(cutoff + 1, self.tail.clone());
        Ok(LatticeFunction { values, tail: self.tail.clone() })
    }

    pub fn to_f64(&self) -> LatticeFunction<f64> {
        LatticeFunction { values: self.values.iter().map(Scalar::to_f64).collect(), tail: self.tail.to_f64() }
    }
}

/// The basis a generator matrix acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "basis", rename_all = "snake_case")]
pub enum BasisTag {
    /// Coefficients of `1, x^2, ..., x^{2n}`.
    EvenPoly { n: usize },
    /// Values `f(0), ..., f(y0), f(∞)`.
    Lattice { y0: usize },
    /// Coefficients `c_{y,k}` for `0 <= y, k <= n`, then the value at `(1, ∞)`.
    Coupled { n: usize },
}

impl BasisTag {
    pub fn dim(&self) -> usize {
        match *self {
            BasisTag::EvenPoly { n } => n + 1,
            BasisTag::Lattice { y0 } => y0 + 2,
            BasisTag::Coupled { n } => (n + 1) * (n + 1) + 1,
        }
    }
}

/// A generator restricted to one of its invariant subspaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMatrix<S = f64> {
    pub matrix: Matrix<S>,
    pub basis: BasisTag,
}

impl<S: Scalar> GeneratorMatrix<S> {
    pub fn arithmetic(&self) -> Arithmetic {
        S::ARITHMETIC
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn apply(&self, v: &[S]) -> Vec<S> {
        self.matrix.mul_vec(v)
    }

    pub fn to_f64(&self) -> GeneratorMatrix<f64> {
        GeneratorMatrix { matrix: self.matrix.to_f64(), basis: self.basis }
    }
}

/// `G` on even-polynomial coefficients of `L_n`.
///
/// Built from the second derivative directly: `G x^{2j} = 2j(2j-1) x^{2j-2} - 2j(2j-1) x^{2j}`,
/// independently of any birth-rate table.
pub fn build_g_matrix<S: Scalar>(n: usize) -> GeneratorMatrix<S> {
    let mut m = Matrix::zeros(n + 1, n + 1);
    for j in 1..=n {
        let a = S::from_u64((2 * j * (2 * j - 1)) as u64);
        m.add_to(j - 1, j, a.clone());
        m.add_to(j, j, -a);
    }
    GeneratorMatrix { matrix: m, basis: BasisTag::EvenPoly { n } }
}

/// `H` on lattice values `f(0), ..., f(y0), f(∞)` with the standard rates.
pub fn build_h_matrix<S: Scalar>(y0: usize) -> GeneratorMatrix<S> {
    build_h_matrix_with(y0, &BirthRates::standard())
}

/// `H` on lattice values, using `rates`. Level `y0 + 1` is identified with `∞`.
pub fn build_h_matrix_with<S: Scalar>(y0: usize, rates: &BirthRates) -> GeneratorMatrix<S> {
    let dim = y0 + 2;
    let mut m = Matrix::zeros(dim, dim);
    for y in 0..=y0 {
        let l = S::from_u64(rates.rate(y as u64));
        m.add_to(y, y + 1, l.clone());
        m.add_to(y, y, -l);
    }
    GeneratorMatrix { matrix: m, basis: BasisTag::Lattice { y0 } }
}

/// `exp(t M)` for a float generator matrix.
pub fn matrix_exp(m: &GeneratorMatrix<f64>, t: f64, tol: f64) -> Result<GeneratorMatrix<f64>> {
    Ok(GeneratorMatrix { matrix: expm(&m.matrix, t, tol)?, basis: m.basis })
}

/// `P_t p` for an even polynomial `p`.
pub fn apply_semigroup_p(t: f64, p: &EvenPolynomial<f64>, tol: f64) -> Result<EvenPolynomial<f64>> {
    let n = p.degree_bound();
    if n > FLOAT_DEGREE_CAP {
        return Err(invalid(format!(
            "degree bound {n} exceeds the float cap {FLOAT_DEGREE_CAP}; use exact arithmetic"
        )));
    }
    let e = matrix_exp(&build_g_matrix::<f64>(n), t, tol)?;
    EvenPolynomial::new(e.apply(p.coeffs()))
}

/// `Q_t f` for a lattice function `f`.
pub fn apply_semigroup_q(t: f64, f: &LatticeFunction<f64>, tol: f64) -> Result<LatticeFunction<f64>> {
    let e = matrix_exp(&build_h_matrix::<f64>(f.cutoff()), t, tol)?;
    LatticeFunction::from_vector(e.apply(&f.to_vector()))
}
