//! Statistical checks on simulated ensembles.

use serde::{Deserialize, Serialize};

use super::ensemble::{fold_paths, path_rng, Executor, Salt};
use super::paths::{simulate_coupled, StepObserver};
use super::{SimConfig, TrajectoryRecord};
use crate::error::{invalid, Result};
use crate::kernels::{geometric_tail, kernel_k_eval};
use crate::poly::Level;

/// Width of the `x` bins of the drift-sign test.
pub const DRIFT_BIN_WIDTH: f64 = 0.05;
/// Bins closer than this to the level's equilibrium point are not tested.
pub const DRIFT_EXCLUSION: f64 = 0.1;
/// A bin is tested only when the model predicts at least this z-score from its occupancy.
pub const DRIFT_MIN_EXPECTED_Z: f64 = 8.0;
/// Every tested bin must show the predicted sign with at least this z-score.
pub const DRIFT_Z_THRESHOLD: f64 = 3.0;

/// Levels below this get their own bin in the total-variation distance.
const TV_LEVELS: u64 = 32;

fn mean_and_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for v in values {
        n += 1.0;
        let d = v - mean;
        mean += d / n;
        m2 += d * (v - mean);
    }
    if n < 2.0 {
        return (mean, f64::INFINITY);
    }
    (mean, (m2 / (n - 1.0) / n).sqrt())
}

fn samples_at(records: &[TrajectoryRecord], t: f64) -> Result<Vec<(f64, Level)>> {
    records
        .iter()
        .map(|r| {
            r.samples
                .iter()
                .find(|s| s.t == t)
                .map(|s| (s.x, s.y))
                .ok_or_else(|| invalid(format!("path {} has no sample at t={t}", r.stream_id)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAtTime {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
    /// `1 - (1 - x0²) e^{-2t}`.
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub x0: f64,
    pub paths: usize,
    pub times: Vec<MomentAtTime>,
}

impl MomentReport {
    /// Every time within `z` standard errors plus `slack`.
    pub fn within(&self, z: f64, slack: f64) -> bool {
        self.times.iter().all(|m| (m.mean - m.target).abs() <= z * m.se + slack)
    }
}

/// Ensemble mean of `X_t²` against its exact value.
pub fn check_moments(records: &[TrajectoryRecord], x0: f64, ts: &[f64]) -> Result<MomentReport> {
    let times = ts
        .iter()
        .map(|&t| {
            let (mean, se) = mean_and_se(samples_at(records, t)?.into_iter().map(|(x, _)| x * x));
            Ok(MomentAtTime { t, mean, se, target: 1.0 - (1.0 - x0 * x0) * (-2.0 * t).exp() })
        })
        .collect::<Result<_>>()?;
    Ok(MomentReport { x0, paths: records.len(), times })
}

/// `E[X_t^power 1{Y_t = y}]` against `E[X_t^power K(X_t, y)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossMoment {
    pub y: u64,
    pub power: i32,
    pub empirical: f64,
    pub predicted: f64,
    /// Standard error of the per-path difference.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingAtTime {
    pub t: f64,
    /// Total variation between the law of `Y_t` and the ensemble mean of `K(X_t, ·)`.
    pub tv: f64,
    pub p0_empirical: f64,
    pub p0_se: f64,
    /// `(1 - x0²) e^{-2t}`.
    pub p0_target: f64,
    pub cross_moments: Vec<CrossMoment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingReport {
    pub x0: f64,
    pub paths: usize,
    pub times: Vec<AveragingAtTime>,
}

impl AveragingReport {
    pub fn max_tv(&self) -> f64 {
        self.times.iter().map(|a| a.tv).fold(0.0, f64::max)
    }

    /// Largest `|empirical - target| / se` of `P(Y_t = 0)`.
    pub fn p0_max_z(&self) -> f64 {
        self.times.iter().map(|a| z_score(a.p0_empirical - a.p0_target, a.p0_se)).fold(0.0, f64::max)
    }

    pub fn cross_moment_max_z(&self) -> f64 {
        self.times
            .iter()
            .flat_map(|a| &a.cross_moments)
            .map(|c| z_score(c.empirical - c.predicted, c.se))
            .fold(0.0, f64::max)
    }
}

/// `|diff| / se`, with an exact zero difference scoring 0 even when `se = 0`.
fn z_score(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff.abs() / se
    }
}

fn level_bin(y: Level) -> usize {
    match y {
        Level::Finite(y) => y.min(TV_LEVELS) as usize,
        Level::Infinite => TV_LEVELS as usize + 1,
    }
}

/// Compares the joint law of `(X_t, Y_t)` in coupled records with the
/// averaging identity `P(Y_t = y | X_t) = K(X_t, y)`.
pub fn check_averaging(records: &[TrajectoryRecord], x0: f64, ts: &[f64]) -> Result<AveragingReport> {
    let n = records.len();
    if n < 2 {
        return Err(invalid("averaging check needs at least two paths"));
    }
    let bins = TV_LEVELS as usize + 2;
    let mut times = Vec::with_capacity(ts.len());
    for &t in ts {
        let states = samples_at(records, t)?;
        let mut empirical = vec![0.0; bins];
        let mut predicted = vec![0.0; bins];
        for &(x, y) in &states {
            empirical[level_bin(y)] += 1.0;
            if x == 1.0 {
                predicted[bins - 1] += 1.0;
                continue;
            }
            for z in 0..TV_LEVELS {
                predicted[z as usize] += kernel_k_eval(x, Level::Finite(z))?;
            }
            predicted[TV_LEVELS as usize] += geometric_tail(x, TV_LEVELS);
        }
        let tv = 0.5 * empirical.iter().zip(&predicted).map(|(e, p)| (e - p).abs()).sum::<f64>() / n as f64;

        let p0 = empirical[0] / n as f64;
        let mut cross_moments = Vec::new();
        for y in 0..=3u64 {
            for power in [1, 2] {
                let pairs: Vec<(f64, f64)> = states
                    .iter()
                    .map(|&(x, ly)| {
                        let g = x.powi(power);
                        let k = if x == 1.0 { 0.0 } else { kernel_k_eval(x, Level::Finite(y)).unwrap_or(0.0) };
                        (g * f64::from(u8::from(ly == Level::Finite(y))), g * k)
                    })
                    .collect();
                let (empirical, _) = mean_and_se(pairs.iter().map(|p| p.0));
                let (predicted, _) = mean_and_se(pairs.iter().map(|p| p.1));
                let (_, se) = mean_and_se(pairs.iter().map(|p| p.0 - p.1));
                cross_moments.push(CrossMoment { y, power, empirical, predicted, se });
            }
        }
        let p0_target = (1.0 - x0 * x0) * (-2.0 * t).exp();
        times.push(AveragingAtTime {
            t,
            tv,
            p0_empirical: p0,
            p0_se: (p0_target * (1.0 - p0_target) / n as f64).sqrt(),
            p0_target,
            cross_moments,
        });
    }
    Ok(AveragingReport { x0, paths: n, times })
}

/// Per-level, per-bin sums of Euler increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftAccumulator {
    levels: usize,
    bins: usize,
    /// `[Σ dx, Σ dt, Σ dx², Σ dx dt, Σ dt²]` per `(level, bin)`.
    sums: Vec<[f64; 5]>,
}

impl DriftAccumulator {
    /// Tracks levels `0..levels`; steps at higher levels are ignored.
    pub fn new(levels: usize) -> Self {
        let bins = (1.0 / DRIFT_BIN_WIDTH).round() as usize;
        DriftAccumulator { levels, bins, sums: vec![[0.0; 5]; levels * bins] }
    }

    pub fn merge(&mut self, other: DriftAccumulator) {
        for (a, b) in self.sums.iter_mut().zip(other.sums) {
            for k in 0..5 {
                a[k] += b[k];
            }
        }
    }

    /// Estimates the drift in every bin and tests its sign where the
    /// occupancy gives the test enough power.
    pub fn evaluate(&self) -> DriftReport {
        let mut bins = Vec::new();
        for y in 0..self.levels {
            let yf = y as f64;
            let center = (yf / (yf + 1.0)).sqrt();
            let drift = |x: f64| if y == 0 { -4.0 * x } else { 4.0 * (yf / x - (yf + 1.0) * x) };
            for b in 0..self.bins {
                let (lo, hi) = (b as f64 * DRIFT_BIN_WIDTH, (b + 1) as f64 * DRIFT_BIN_WIDTH);
                let predicted_sign = if hi <= center - DRIFT_EXCLUSION {
                    1.0
                } else if lo >= center + DRIFT_EXCLUSION {
                    -1.0
                } else {
                    0.0
                };
                let [sx, st, sxx, sxt, stt] = self.sums[y * self.bins + b];
                if st <= 0.0 {
                    continue;
                }
                let b_hat = sx / st;
                let resid = (sxx - 2.0 * b_hat * sxt + b_hat * b_hat * stt).max(0.0);
                let se = resid.sqrt() / st;
                let z = b_hat / se;
                // the drift is decreasing in x, so its smallest magnitude sits on
                // the edge nearest the centre; the noise is largest at `lo`
                let weakest = if predicted_sign > 0.0 { drift(hi) } else { drift(lo) };
                let expected_z = weakest.abs() * (st / (2.0 * (1.0 - lo * lo))).sqrt();
                let tested = predicted_sign != 0.0 && expected_z >= DRIFT_MIN_EXPECTED_Z;
                bins.push(DriftBin {
                    y: y as u64,
                    x_lo: lo,
                    x_hi: hi,
                    occupancy: st,
                    drift_estimate: b_hat,
                    se,
                    z,
                    predicted_sign,
                    expected_z,
                    tested,
                });
            }
        }
        let untested_levels: Vec<u64> =
            (0..self.levels as u64).filter(|&y| !bins.iter().any(|b| b.y == y && b.tested)).collect();
        let pass = untested_levels.is_empty()
            && bins.iter().filter(|b| b.tested).all(|b| b.z * b.predicted_sign >= DRIFT_Z_THRESHOLD);
        DriftReport { bins, untested_levels, pass }
    }
}

impl StepObserver for DriftAccumulator {
    #[inline]
    fn observe(&mut self, y: u64, x: f64, dx: f64, dt: f64) {
        if (y as usize) < self.levels {
            let b = ((x / DRIFT_BIN_WIDTH) as usize).min(self.bins - 1);
            let s = &mut self.sums[y as usize * self.bins + b];
            s[0] += dx;
            s[1] += dt;
            s[2] += dx * dx;
            s[3] += dx * dt;
            s[4] += dt * dt;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftBin {
    pub y: u64,
    pub x_lo: f64,
    pub x_hi: f64,
    /// Time spent in the bin at this level.
    pub occupancy: f64,
    pub drift_estimate: f64,
    pub se: f64,
    pub z: f64,
    /// +1 below the level's equilibrium point, -1 above, 0 when too close to test.
    pub predicted_sign: f64,
    pub expected_z: f64,
    pub tested: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub bins: Vec<DriftBin>,
    /// Levels without a single adequately occupied bin.
    pub untested_levels: Vec<u64>,
    pub pass: bool,
}

/// Runs coupled paths from `x0` and tests the sign of the `X` drift at each
/// level `0..levels` against the sign of `x_y - x`, where `x_y = sqrt(y/(y+1))`.
pub fn drift_sign_check(x0: f64, config: &SimConfig, levels: usize, executor: Executor) -> Result<DriftReport> {
    config.validate()?;
    let acc = fold_paths(
        config.n_paths,
        executor,
        || DriftAccumulator::new(levels),
        |acc, i| {
            let mut rng = path_rng(config.master_seed, Salt::Drift, i);
            simulate_coupled(x0, config, &[], i, &mut rng, acc).map(|_| ())
        },
        DriftAccumulator::merge,
    )?;
    Ok(acc.evaluate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{coupled_ensemble, wf_ensemble};

    #[test]
    fn running_mean_and_se() {
        let (m, se) = mean_and_se([1.0, 2.0, 3.0, 4.0].into_iter());
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn drift_estimator_recovers_constant_drift() {
        let mut acc = DriftAccumulator::new(1);
        // deterministic increments with drift -2 in bin [0.5, 0.55)
        for _ in 0..1000 {
            acc.observe(0, 0.52, -2.0 * 1e-3, 1e-3);
        }
        let report = acc.evaluate();
        let bin = report.bins.iter().find(|b| b.x_lo == 0.5).unwrap();
        assert!((bin.drift_estimate + 2.0).abs() < 1e-12);
        assert!((bin.occupancy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn averaging_at_small_scale() {
        let cfg = SimConfig { n_paths: 4000, t_max: 0.2, level_cap: 128, ..Default::default() };
        let ts = [0.05, 0.2];
        let recs = coupled_ensemble(0.3, &cfg, &ts, Executor::Parallel).unwrap();
        let rep = check_averaging(&recs, 0.3, &ts).unwrap();
        assert!(rep.max_tv() < 0.06, "{}", rep.max_tv());
        assert!(rep.p0_max_z() < 4.0, "{}", rep.p0_max_z());
        assert!(rep.cross_moment_max_z() < 4.5, "{}", rep.cross_moment_max_z());
    }

    #[test]
    fn diffusion_second_moment() {
        let cfg = SimConfig { n_paths: 4000, t_max: 0.5, ..Default::default() };
        let ts = [0.25, 0.5];
        let recs = wf_ensemble(0.2, &cfg, &ts, Executor::Parallel).unwrap();
        let rep = check_moments(&recs, 0.2, &ts).unwrap();
        assert!(rep.within(4.0, 0.005), "{rep:?}");
    }
}
