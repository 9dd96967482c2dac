//! Tail sums of the inverse birth rates.
//!
//! With `u = 2y + 3/2` one has `λ_y = u² - 1/4`, so `1/λ_y` and `1/λ_y²` expand
//! in even powers of `1/u` and their tails become rapidly convergent series of
//! Hurwitz zeta values. Direct partial sums would lose most digits to
//! cancellation (the tails decay like `1/y` and `1/y³`).

/// Hurwitz zeta arguments are shifted up to at least this before the
/// asymptotic expansion is used.
const SHIFT: f64 = 16.0;

/// `B_{2k} / (2k)!` for `k = 1..=8`.
const BERNOULLI_OVER_FACTORIAL: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
    1.0 / 74_724_249_600.0,
    -3617.0 / 10_670_622_842_880_000.0,
];

/// Number of terms kept from the `1/u²` expansions.
const SERIES_TERMS: i32 = 9;

/// Hurwitz zeta `ζ(s, a) = Σ_{j>=0} (a + j)^{-s}` for integer `s >= 2`, `a > 0`.
pub fn hurwitz_zeta(s: u32, a: f64) -> f64 {
    assert!(s >= 2, "hurwitz_zeta needs s >= 2");
    assert!(a > 0.0 && a.is_finite(), "hurwitz_zeta needs a > 0");
    let si = s as i32;
    let sf = s as f64;
    let mut head = Vec::new();
    let mut a = a;
    while a < SHIFT {
        head.push(a.powi(-si));
        a += 1.0;
    }
    // Euler-Maclaurin at the shifted argument
    let mut tail = a.powf(1.0 - sf) / (sf - 1.0) + 0.5 * a.powi(-si);
    let mut rising = sf; // s (s+1) ... (s + 2k - 2)
    let mut power = a.powi(-si - 1);
    for (k, b) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        tail += b * rising * power;
        let k = k as f64 + 1.0;
        rising *= (sf + 2.0 * k - 1.0) * (sf + 2.0 * k);
        power /= a * a;
    }
    // smallest terms first
    head.iter().rev().fold(tail, |acc, v| acc + v)
}

/// Trigamma `ψ'(z) = ζ(2, z)`.
pub fn trigamma(z: f64) -> f64 {
    hurwitz_zeta(2, z)
}

fn inverse_rate(y: u64) -> f64 {
    let y = y as f64;
    1.0 / ((2.0 * y + 1.0) * (2.0 * y + 2.0))
}

/// `Σ_{m>=0} (m + 1)^p 4^{-m} 2^{-(s0 + 2m)} ζ(s0 + 2m, a)`, the tail series for `p ∈ {0, 1}`.
fn even_power_series(s0: u32, p: i32, a: f64) -> f64 {
    (0..SERIES_TERMS)
        .rev()
        .map(|m| {
            let s = s0 + 2 * m as u32;
            f64::from(m + 1).powi(p) * 4f64.powi(-m) * 2f64.powi(-(s as i32)) * hurwitz_zeta(s, a)
        })
        .sum()
}

/// Mean of the explosion time from level `y0`: `Σ_{y>=y0} 1/λ_y`.
///
/// Equals `ln 2` at `y0 = 0` (the alternating harmonic series) and decreases
/// like `1/(4 y0)`.
pub fn explosion_mean(y0: u64) -> f64 {
    let start = y0.max(SHIFT as u64);
    let tail = even_power_series(2, 0, start as f64 + 0.75);
    (y0..start).rev().fold(tail, |acc, y| acc + inverse_rate(y))
}

/// Variance of the explosion time from level `y0`: `Σ_{y>=y0} 1/λ_y²`.
///
/// From level 0 this is `π²/6 - 2 ln 2`.
pub fn explosion_variance(y0: u64) -> f64 {
    let start = y0.max(SHIFT as u64);
    let tail = even_power_series(4, 1, start as f64 + 0.75);
    (y0..start).rev().fold(tail, |acc, y| acc + inverse_rate(y).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{LN_2, PI};

    #[test]
    fn zeta_closed_forms() {
        assert_relative_eq!(hurwitz_zeta(2, 1.0), PI * PI / 6.0, max_relative = 1e-15);
        assert_relative_eq!(hurwitz_zeta(4, 1.0), PI.powi(4) / 90.0, max_relative = 1e-15);
        assert_relative_eq!(hurwitz_zeta(3, 1.0), 1.202_056_903_159_594_3, max_relative = 1e-15);
        assert_relative_eq!(hurwitz_zeta(2, 0.5), PI * PI / 2.0, max_relative = 1e-15);
        // ζ(6, 1/2) = 2^6 Σ (2j+1)^-6 = 2^6 (1 - 2^-6) ζ(6)
        let odd = hurwitz_zeta(6, 0.5) / 64.0;
        assert_relative_eq!(odd, (1.0 - 1.0 / 64.0) * PI.powi(6) / 945.0, max_relative = 1e-14);
    }

    #[test]
    fn zeta_recurrence_across_shift() {
        for &a in &[0.3, 7.5, 15.9, 16.0, 40.25] {
            for s in 2..12 {
                let lhs = hurwitz_zeta(s, a);
                let rhs = a.powi(-(s as i32)) + hurwitz_zeta(s, a + 1.0);
                assert_relative_eq!(lhs, rhs, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn trigamma_values() {
        assert_relative_eq!(trigamma(1.0), PI * PI / 6.0, max_relative = 1e-15);
        assert_relative_eq!(trigamma(100.0), 0.010_050_166_663_333_571, max_relative = 1e-13);
    }

    #[test]
    fn mean_closed_forms() {
        assert_relative_eq!(explosion_mean(0), LN_2, max_relative = 1e-15);
        assert_relative_eq!(explosion_mean(1), LN_2 - 0.5, max_relative = 1e-14);
        let mut prev = explosion_mean(0);
        for y in 1..200 {
            let m = explosion_mean(y);
            assert!(m < prev && m > 0.0);
            assert_relative_eq!(prev - m, inverse_rate(y - 1), max_relative = 1e-11);
            prev = m;
        }
        // 1/λ_y ≈ 1/(2y+1) - 1/(2y+2) telescopes to ≈ 1/(4y) for large y
        assert_relative_eq!(explosion_mean(1_000_000) * 4_000_000.0, 1.0, max_relative = 1e-5);
    }

    #[test]
    fn variance_closed_form() {
        assert_relative_eq!(explosion_variance(0), PI * PI / 6.0 - 2.0 * LN_2, max_relative = 1e-15);
        for y in 1..100 {
            assert_relative_eq!(
                explosion_variance(y - 1) - explosion_variance(y),
                inverse_rate(y - 1).powi(2),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn tails_match_independent_values() {
        // (ψ(y0+1) - ψ(y0+1/2))/2 and ψ'(2y0+1) - 2·mean, evaluated at 30 digits
        let cases = [
            (3u64, 0.076_480_513_893_278_642_75, 5.841_501_727_802_620_824e-4),
            (16, 0.015_380_978_352_418_435_65, 4.847_315_465_218_825_336e-6),
            (17, 0.014_489_712_755_270_485_56, 4.052_961_100_559_333_278e-6),
            (20, 0.012_343_798_767_251_234_38, 2.506_306_788_559_388_896e-6),
            (57, 0.004_366_728_964_055_431_592, 1.110_135_485_919_926_845e-7),
        ];
        for (y0, mean, var) in cases {
            assert_relative_eq!(explosion_mean(y0), mean, max_relative = 1e-15);
            assert_relative_eq!(explosion_variance(y0), var, max_relative = 1e-14);
        }
    }
}
