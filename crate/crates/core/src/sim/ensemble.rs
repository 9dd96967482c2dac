//! Ensembles of independent paths.
//!
//! Path `i` of an ensemble always draws from ChaCha stream `i` of a key derived
//! from the master seed and a per-purpose salt, and results are merged in path
//! order over fixed-size chunks. The output is therefore bit-identical between
//! the sequential and parallel executors and across thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::birth::simulate_birth;
use super::paths::{simulate_coupled, simulate_wf};
use super::{SimConfig, TrajectoryRecord};
use crate::error::Result;
use crate::kernels::sample_k;
use crate::poly::Level;

/// Paths per work unit; fixed so that merges do not depend on scheduling.
const CHUNK: usize = 256;

/// Separates the random streams of different kinds of ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Salt {
    Birth = 1,
    Coupled = 2,
    Diffusion = 3,
    Mixture = 4,
    Drift = 5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Executor {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled and runs sequentially otherwise.
    #[default]
    Parallel,
}

/// The random stream of path `path`.
pub fn path_rng(master_seed: u64, salt: Salt, path: u64) -> ChaCha8Rng {
    let key = master_seed ^ (salt as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(path);
    rng
}

fn chunk_ranges(n: usize) -> Vec<(usize, usize)> {
    (0..n.div_ceil(CHUNK)).map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(n))).collect()
}

/// Folds over paths `0..n`: each chunk folds in order from `init()`, then the
/// chunk accumulators are merged in order.
pub fn fold_paths<A, I, S, M>(n: usize, executor: Executor, init: I, step: S, merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64) -> Result<()> + Sync,
    M: Fn(&mut A, A),
{
    let run_chunk = |&(lo, hi): &(usize, usize)| -> Result<A> {
        let mut acc = init();
        for i in lo..hi {
            step(&mut acc, i as u64)?;
        }
        Ok(acc)
    };
    let ranges = chunk_ranges(n);
    let parts: Vec<Result<A>> = match executor {
        #[cfg(feature = "parallel")]
        Executor::Parallel => {
            use rayon::prelude::*;
            ranges.par_iter().map(run_chunk).collect()
        }
        _ => ranges.iter().map(run_chunk).collect(),
    };
    let mut total = init();
    for part in parts {
        merge(&mut total, part?);
    }
    Ok(total)
}

/// Maps every path index to a value, in path order.
pub fn map_paths<T, F>(n: usize, executor: Executor, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    fold_paths(
        n,
        executor,
        Vec::new,
        |acc: &mut Vec<T>, i| {
            acc.push(f(i)?);
            Ok(())
        },
        |total, part| total.extend(part),
    )
}

/// Explosion times of `config.n_paths` birth paths from `start`.
pub fn birth_ensemble(start: u64, config: &SimConfig, executor: Executor) -> Result<Vec<f64>> {
    config.validate()?;
    map_paths(config.n_paths, executor, |i| {
        let mut rng = path_rng(config.master_seed, Salt::Birth, i);
        Ok(simulate_birth(start, config.level_cap, &mut rng)?.explosion_time)
    })
}

/// Explosion times of birth paths started from `Y0 ~ K(x0, ·)`.
pub fn birth_mixture_ensemble(x0: f64, config: &SimConfig, executor: Executor) -> Result<Vec<f64>> {
    config.validate()?;
    map_paths(config.n_paths, executor, |i| {
        let mut rng = path_rng(config.master_seed, Salt::Mixture, i);
        match sample_k(x0, &mut rng)? {
            Level::Infinite => Ok(0.0),
            Level::Finite(y) => Ok(simulate_birth(y, config.level_cap, &mut rng)?.explosion_time),
        }
    })
}

/// Coupled paths from `x0`, sampled at `sample_times`.
pub fn coupled_ensemble(
    x0: f64,
    config: &SimConfig,
    sample_times: &[f64],
    executor: Executor,
) -> Result<Vec<TrajectoryRecord>> {
    config.validate()?;
    map_paths(config.n_paths, executor, |i| {
        let mut rng = path_rng(config.master_seed, Salt::Coupled, i);
        simulate_coupled(x0, config, sample_times, i, &mut rng, &mut ())
    })
}

/// Paths of the reflected diffusion from `x0`, sampled at `sample_times`.
pub fn wf_ensemble(
    x0: f64,
    config: &SimConfig,
    sample_times: &[f64],
    executor: Executor,
) -> Result<Vec<TrajectoryRecord>> {
    config.validate()?;
    map_paths(config.n_paths, executor, |i| {
        let mut rng = path_rng(config.master_seed, Salt::Diffusion, i);
        simulate_wf(x0, config, sample_times, i, &mut rng)
    })
}
