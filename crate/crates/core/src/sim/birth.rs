use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};

use crate::analytics::{explosion_mean, explosion_variance};
use crate::error::{invalid, Result};
use crate::poly::{birth_rate, Level};

/// A pure birth path from `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthPath {
    pub start: u64,
    /// Level at and above which holding times were not drawn individually.
    pub cap: u64,
    /// `jump_times[i]` is when the path leaves level `start + i`, for levels below the cap.
    pub jump_times: Vec<f64>,
    pub explosion_time: f64,
}

impl BirthPath {
    /// Level at time `t`, with levels at or above the cap reported as the cap.
    pub fn level_at(&self, t: f64) -> Level {
        if t >= self.explosion_time {
            return Level::Infinite;
        }
        let jumped = self.jump_times.partition_point(|&s| s <= t) as u64;
        Level::Finite(self.start + jumped)
    }
}

/// Draws the jump times and explosion time of the birth process from `start`.
///
/// Holding times at levels below `cap` are exact exponentials. The remainder
/// `Σ_{y>=cap} E_y` has mean `Σ 1/λ_y` and variance `Σ 1/λ_y²`, both known in
/// closed form; it is drawn as a Gamma variable with those two moments. At the
/// default cap the remainder has mean about 1e-3 and standard deviation about
/// 3.5e-5, so the approximation only touches the law below that scale.
pub fn simulate_birth<R: Rng + ?Sized>(start: u64, cap: u64, rng: &mut R) -> Result<BirthPath> {
    if cap == 0 {
        return Err(invalid("level cap must be >= 1"));
    }
    let mut t = 0.0;
    let mut jump_times = Vec::with_capacity(cap.saturating_sub(start) as usize);
    for y in start..cap {
        let e = Exp::new(birth_rate(y) as f64).expect("positive rate");
        t += e.sample(rng);
        jump_times.push(t);
    }
    let from = start.max(cap);
    let (m, v) = (explosion_mean(from), explosion_variance(from));
    let tail = Gamma::new(m * m / v, v / m).map_err(|e| invalid(format!("tail law: {e}")))?.sample(rng);
    Ok(BirthPath { start, cap, jump_times, explosion_time: t + tail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = simulate_birth(0, 16, &mut rng).unwrap();
        assert_eq!(p.jump_times.len(), 16);
        assert!(p.jump_times.windows(2).all(|w| w[1] > w[0]));
        assert!(p.explosion_time > *p.jump_times.last().unwrap());
        assert_eq!(p.level_at(0.0), Level::Finite(0));
        assert_eq!(p.level_at(p.jump_times[0]), Level::Finite(1));
        assert_eq!(p.level_at(p.explosion_time), Level::Infinite);
        assert_eq!(p.level_at(p.explosion_time - 1e-12), Level::Finite(16));
    }

    #[test]
    fn start_above_cap_is_one_gamma_draw() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20_000;
        let mean = (0..n).map(|_| simulate_birth(300, 256, &mut rng).unwrap().explosion_time).sum::<f64>() / n as f64;
        let se = (explosion_variance(300) / n as f64).sqrt();
        assert!((mean - explosion_mean(300)).abs() < 4.0 * se);
    }

    #[test]
    fn mean_from_level_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 50_000;
        let mean = (0..n).map(|_| simulate_birth(2, 64, &mut rng).unwrap().explosion_time).sum::<f64>() / n as f64;
        // ln 2 - 1/2 - 1/12
        let target = std::f64::consts::LN_2 - 0.5 - 1.0 / 12.0;
        let se = (explosion_variance(2) / n as f64).sqrt();
        assert!((mean - target).abs() < 3.0 * se, "{mean} vs {target}");
    }
}
