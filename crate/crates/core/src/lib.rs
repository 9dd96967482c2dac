//! Intertwining of the Wright–Fisher diffusion reflected at 0 with an explosive
//! pure birth process.
//!
//! The diffusion on `[0, 1]` has generator `G f = (1 - x²) f''`, is reflected at
//! 0 and absorbed at 1. The birth process on `{0, 1, ..., ∞}` jumps `y → y + 1`
//! at rate `λ_y = (2y + 1)(2y + 2)` and explodes in finite time. The kernel
//! `K(x, y) = (1 - x²) x^{2y}` links them: `G K = K H` and `P_t K = K Q_t`.
//!
//! The crate provides
//!
//! * exact (rational) and floating-point generator matrices on invariant
//!   subspaces, plus their semigroups ([`poly`]);
//! * the link kernels `K`, `Λ`, `Φ`, `Ψ` ([`kernels`]);
//! * the coupled generator and numerical verifiers of every intertwining
//!   relation ([`intertwine`]);
//! * path simulation of the three processes with deterministic parallel
//!   ensembles ([`sim`]);
//! * closed-form and rigorously bracketed laws of the explosion and absorption
//!   times ([`analytics`]).

pub mod analytics;
pub mod error;
pub mod expm;
pub mod intertwine;
pub mod kernels;
pub mod matrix;
pub mod poly;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use kernels::{CoupledFunction, CoupledLayout};
pub use matrix::Matrix;
pub use poly::{BirthRates, EvenPolynomial, GeneratorMatrix, LatticeFunction, Level};
pub use scalar::{Arithmetic, Rational, Scalar};
