use rand::Rng;
use rand_distr::StandardNormal;

use super::birth::simulate_birth;
use super::{Sample, SimConfig, TrajectoryRecord};
use crate::error::{invalid, Error, Result};
use crate::kernels::sample_k;
use crate::poly::Level;

/// Largest double below 1; coupled paths stay at or below it until explosion.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Receives every Euler step of a coupled path: the level, the state at the
/// start of the step, its increment and the step length.
pub trait StepObserver {
    fn observe(&mut self, y: u64, x: f64, dx: f64, dt: f64);
}

impl StepObserver for () {
    #[inline]
    fn observe(&mut self, _: u64, _: f64, _: f64, _: f64) {}
}

fn check_times(sample_times: &[f64]) -> Result<()> {
    if sample_times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(invalid("sample times must be finite and >= 0"));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("sample times must be sorted"));
    }
    Ok(())
}

fn non_finite(what: &str, t: f64, x: f64, y: u64) -> Error {
    Error::NumericFailure(format!("{what} path left the reals at t={t}, x={x}, y={y}"))
}

/// Moves `t` forward by `dt`, landing exactly on `target` when the step was cut to reach it.
#[inline]
fn advance(t: f64, dt: f64, target: f64) -> f64 {
    if dt >= target - t {
        target
    } else {
        t + dt
    }
}

/// Simulates the coupled process from `(x0, Y0)` with `Y0 ~ K(x0, ·)`.
///
/// Between jumps `X` follows `dX = 4(y/X - (y+1)X) dt + sqrt(2(1 - X²)) dW`,
/// discretised by Euler steps that shrink near both boundaries. Holding
/// times of `Y` are drawn up front; steps are cut to land on every jump, on
/// every requested sample time and on the horizon `config.t_max`. At the
/// explosion time `X` is pinned to 1.
pub fn simulate_coupled<R: Rng + ?Sized, O: StepObserver>(
    x0: f64,
    config: &SimConfig,
    sample_times: &[f64],
    stream_id: u64,
    rng: &mut R,
    observer: &mut O,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    check_times(sample_times)?;
    let y0 = sample_k(x0, rng)?;
    let mut record = TrajectoryRecord {
        stream_id,
        x0,
        samples: Vec::with_capacity(sample_times.len()),
        jump_times: Vec::new(),
        explosion_time: None,
        absorption_time: None,
        steps: 0,
    };
    let Level::Finite(y0) = y0 else {
        // started at 1
        record.explosion_time = Some(0.0);
        record.absorption_time = Some(0.0);
        record.samples.extend(sample_times.iter().map(|&t| Sample { t, x: 1.0, y: Level::Infinite }));
        return Ok(record);
    };

    let cap = config.level_cap;
    let birth = simulate_birth(y0, cap, rng)?;
    let horizon = config.t_max;
    let mut t = 0.0;
    let mut x = x0;
    let mut y = y0;
    let mut next_jump = 0usize;
    let mut next_sample = 0usize;

    loop {
        let jump_at = birth.jump_times.get(next_jump).copied().unwrap_or(birth.explosion_time);
        let sample_at = sample_times.get(next_sample).copied().unwrap_or(f64::INFINITY);
        let target = jump_at.min(sample_at).min(horizon);

        while t < target {
            if x == 0.0 && y >= 1 {
                // the entrance drift 4y/x at 0: x² grows like 8y t
                let dt = config.substep.dt_min.min(target - t);
                x = (8.0 * y as f64 * dt).sqrt();
                t = advance(t, dt, target);
                record.steps += 1;
                continue;
            }
            let dt = config.local_dt(x, y).min(target - t);
            let yf = y as f64;
            let drift = if y == 0 { -4.0 * x } else { 4.0 * (yf / x - (yf + 1.0) * x) };
            let z: f64 = rng.sample(StandardNormal);
            let var = 2.0 * (1.0 - x) * (1.0 + x) * dt;
            let mut xn = (x + drift * dt + var.sqrt() * z).abs();
            if xn >= 1.0 {
                xn = (2.0 - xn).abs().min(BELOW_ONE);
            }
            if !xn.is_finite() {
                return Err(non_finite("coupled", t, x, y));
            }
            observer.observe(y, x, xn - x, dt);
            x = xn;
            t = advance(t, dt, target);
            record.steps += 1;
        }

        if t >= birth.explosion_time {
            record.explosion_time = Some(birth.explosion_time);
            record.absorption_time = Some(birth.explosion_time);
            for &s in &sample_times[next_sample..] {
                if s <= horizon {
                    record.samples.push(Sample { t: s, x: 1.0, y: Level::Infinite });
                }
            }
            return Ok(record);
        }
        if next_jump < birth.jump_times.len() && t >= jump_at {
            y += 1;
            next_jump += 1;
            if config.record_jumps {
                record.jump_times.push(t);
            }
            continue;
        }
        while next_sample < sample_times.len() && sample_times[next_sample] <= t {
            record.samples.push(Sample { t: sample_times[next_sample], x, y: Level::Finite(y) });
            next_sample += 1;
        }
        if t >= horizon {
            return Ok(record);
        }
    }
}

/// Simulates the diffusion `dX = sqrt(2(1 - X²)) dW` reflected at 0, absorbed
/// once `X >= 1 - boundary_eps`, up to `config.t_max`.
///
/// Sample times after absorption report `x = 1`; `y` is unused and set to 0.
pub fn simulate_wf<R: Rng + ?Sized>(
    x0: f64,
    config: &SimConfig,
    sample_times: &[f64],
    stream_id: u64,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    check_times(sample_times)?;
    if !(0.0..=1.0).contains(&x0) {
        return Err(invalid(format!("start point x={x0} outside [0, 1]")));
    }
    let mut record = TrajectoryRecord {
        stream_id,
        x0,
        samples: Vec::with_capacity(sample_times.len()),
        jump_times: Vec::new(),
        explosion_time: None,
        absorption_time: None,
        steps: 0,
    };
    let threshold = 1.0 - config.boundary_eps;
    let horizon = config.t_max;
    let mut t = 0.0;
    let mut x = x0;
    let mut next_sample = 0usize;
    let mut absorbed = x >= threshold;
    if absorbed {
        record.absorption_time = Some(0.0);
    }

    while !absorbed && t < horizon {
        let sample_at = sample_times.get(next_sample).copied().unwrap_or(f64::INFINITY);
        let target = sample_at.min(horizon);
        while t < target {
            let dt = config.dt_base.min(target - t);
            let z: f64 = rng.sample(StandardNormal);
            let xn = (x + (2.0 * (1.0 - x) * (1.0 + x) * dt).sqrt() * z).abs();
            if !xn.is_finite() {
                return Err(non_finite("diffusion", t, x, 0));
            }
            x = xn;
            t = advance(t, dt, target);
            record.steps += 1;
            if x >= threshold {
                absorbed = true;
                record.absorption_time = Some(t);
                break;
            }
        }
        while !absorbed && next_sample < sample_times.len() && sample_times[next_sample] <= t {
            record.samples.push(Sample { t: sample_times[next_sample], x, y: Level::Finite(0) });
            next_sample += 1;
        }
    }
    if absorbed {
        for &s in &sample_times[next_sample..] {
            if s <= horizon {
                record.samples.push(Sample { t: s, x: 1.0, y: Level::Finite(0) });
            }
        }
    }
    Ok(record)
}
