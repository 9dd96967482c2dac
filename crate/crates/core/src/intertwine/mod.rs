//! The coupled generator on `L_n` and numerical checks of every intertwining
//! relation between the diffusion, the birth process and the coupled process.

mod approx;
mod generator;
mod maximum;
mod verify;

pub use approx::{
    approximate_semigroup, default_sample_points, verify_pt_approximation, ApproximationReport, ExcludedPoint,
    SamplePoint, EXACT_FLOOR, MIN_DENOMINATOR, MIN_ORDER,
};
pub use generator::{
    apply_coupled_generator, build_coupled_generator, build_coupled_generator_with, coupled_generator_at,
    coupled_monomial,
};
pub use maximum::{
    check_one, locate_maximum, positive_maximum_check, random_coupled_function, Maximizer, MaximumPrincipleReport,
    Violation, GRID_POINTS, REL_TOL,
};
pub use verify::{
    verify_gk_kh, verify_lambda_intertwining, verify_psi_intertwining, verify_pt_k_k_qt, VerificationReport,
    VerifyOptions,
};
