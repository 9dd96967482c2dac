//! Monte Carlo engines for the birth process, the reflected diffusion and the
//! coupled process, with reproducible per-path random streams.

mod birth;
mod checks;
mod ensemble;
mod paths;

pub use birth::{simulate_birth, BirthPath};
pub use checks::{
    check_averaging, check_moments, drift_sign_check, AveragingAtTime, AveragingReport, CrossMoment, DriftAccumulator,
    DriftBin, DriftReport, MomentAtTime, MomentReport, DRIFT_BIN_WIDTH, DRIFT_EXCLUSION, DRIFT_MIN_EXPECTED_Z,
    DRIFT_Z_THRESHOLD,
};
pub use ensemble::{
    birth_ensemble, birth_mixture_ensemble, coupled_ensemble, fold_paths, map_paths, path_rng, wf_ensemble, Executor,
    Salt,
};
pub use paths::{simulate_coupled, simulate_wf, StepObserver};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::poly::Level;

/// Step-size adaptivity of the coupled scheme.
///
/// `dt = min(dt_base, zero_fraction · x²/y², one_fraction · (1-x)/(y+1))`, floored
/// at `dt_min`; the first cap only applies for `y >= 1`. With the defaults the
/// drift displacement `|b| dt` stays below about 1/16 of the distance to 0
/// and 1/8 of the distance to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubstepRule {
    pub zero_fraction: f64,
    pub one_fraction: f64,
    pub dt_min: f64,
}

impl Default for SubstepRule {
    fn default() -> Self {
        SubstepRule { zero_fraction: 1.0 / 64.0, one_fraction: 1.0 / 32.0, dt_min: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt_base: f64,
    /// The standalone diffusion counts as absorbed once `x >= 1 - boundary_eps`.
    pub boundary_eps: f64,
    pub substep: SubstepRule,
    pub t_max: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    /// Holding times are drawn one by one below this level; the rest of the
    /// explosion time is a single moment-matched Gamma draw, and coupled paths
    /// report every level at or above the cap as the cap.
    pub level_cap: u64,
    /// Keep every jump time in coupled records (costly for large ensembles).
    pub record_jumps: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt_base: 1e-4,
            boundary_eps: 1e-4,
            substep: SubstepRule::default(),
            t_max: 1.0,
            n_paths: 10_000,
            master_seed: 0x5eed_2024,
            level_cap: 256,
            record_jumps: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_base > 0.0 && self.dt_base.is_finite()) {
            return Err(invalid(format!("dt_base must be > 0, got {}", self.dt_base)));
        }
        if !(self.boundary_eps > 0.0 && self.boundary_eps < 1e-2) {
            return Err(invalid(format!("boundary_eps must lie in (0, 0.01), got {}", self.boundary_eps)));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(invalid(format!("t_max must be > 0 and finite, got {}", self.t_max)));
        }
        if self.n_paths == 0 {
            return Err(invalid("n_paths must be >= 1"));
        }
        let s = &self.substep;
        if !(s.dt_min > 0.0 && s.dt_min <= self.dt_base && s.zero_fraction > 0.0 && s.one_fraction > 0.0) {
            return Err(invalid("substep rule needs positive fractions and 0 < dt_min <= dt_base"));
        }
        if self.level_cap == 0 {
            return Err(invalid("level_cap must be >= 1"));
        }
        Ok(())
    }

    pub(crate) fn local_dt(&self, x: f64, y: u64) -> f64 {
        let s = &self.substep;
        let yf = y as f64;
        let mut dt = self.dt_base.min(s.one_fraction * (1.0 - x) / (yf + 1.0));
        if y >= 1 {
            dt = dt.min(s.zero_fraction * x * x / (yf * yf));
        }
        dt.max(s.dt_min)
    }
}

/// State of a path at a requested time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: Level,
}

/// One simulated path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// Index of the random stream within its ensemble.
    pub stream_id: u64,
    pub x0: f64,
    pub samples: Vec<Sample>,
    /// Times of the jumps `y -> y + 1` (coupled runs with `record_jumps`).
    pub jump_times: Vec<f64>,
    /// Explosion of `Y`, if it happened within the horizon.
    pub explosion_time: Option<f64>,
    /// Absorption of `X` at 1, if it happened within the horizon.
    pub absorption_time: Option<f64>,
    /// Euler steps taken.
    pub steps: u64,
}

impl TrajectoryRecord {
    /// Checks the path invariants: `X ∈ [0, 1]`, `Y` nondecreasing, jump times
    /// increasing, and in coupled runs `X = 1` exactly when `Y = ∞`.
    pub fn check_invariants(&self, coupled: bool) -> std::result::Result<(), String> {
        for s in &self.samples {
            if !(0.0..=1.0).contains(&s.x) {
                return Err(format!("x={} outside [0, 1] at t={}", s.x, s.t));
            }
            if coupled && ((s.x == 1.0) != s.y.is_infinite()) {
                return Err(format!("x={} with y={} at t={}", s.x, s.y, s.t));
            }
        }
        if self.samples.windows(2).any(|w| w[1].y < w[0].y || w[1].t < w[0].t) {
            return Err("samples not ordered or y decreasing".into());
        }
        if self.jump_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err("jump times not strictly increasing".into());
        }
        if coupled && self.explosion_time != self.absorption_time {
            return Err("coupled explosion and absorption times differ".into());
        }
        Ok(())
    }
}
