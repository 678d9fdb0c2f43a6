//! Two-valued kick noise `Δ(τ) = ±Δ₀` with random switching intervals.

use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Seeded generator used everywhere randomness enters a run.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of ensemble member `index` derived from `master`.
///
/// The master seed keys a ChaCha8 generator and `index` selects its stream;
/// the first word of that stream is the member seed. Members therefore do
/// not depend on how many others exist or in which order they run.
pub fn realization_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// One switching interval, uniform on `(−3τ_R/4, 5τ_R/4)` conditioned on
/// being positive.
pub fn draw_interval<R: Rng + ?Sized>(rng: &mut R, tau_r: f64) -> f64 {
    loop {
        let u: f64 = rng.gen();
        let dt = -0.75 * tau_r + 2.0 * tau_r * u;
        if dt > 0.0 {
            return dt;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub seed: u64,
    pub delta0: f64,
    /// Start time of each constant interval; the first is 0.
    pub kick_times: Vec<f64>,
    /// `+1, −1, +1, …`, one per interval.
    pub signs: Vec<i8>,
}

impl NoiseRealization {
    /// A realization that never kicks, with `Δ ≡ 0`.
    pub fn quiet() -> Self {
        Self {
            seed: 0,
            delta0: 0.0,
            kick_times: alloc::vec![0.0],
            signs: alloc::vec![1],
        }
    }

    /// `Δ(τ)`; intervals are closed on the left.
    pub fn value_at(&self, tau: f64) -> f64 {
        let idx = self.kick_times.partition_point(|&t| t <= tau);
        let idx = idx.saturating_sub(1);
        self.delta0 * f64::from(self.signs[idx])
    }

    pub fn intervals(&self) -> usize {
        self.kick_times.len()
    }

    /// The same realization seen from `origin`: `shifted(o).value_at(t) ==
    /// value_at(o + t)` for `t ≥ 0`.
    pub fn shifted(&self, origin: f64) -> Self {
        let first = self.kick_times.partition_point(|&t| t <= origin).saturating_sub(1);
        let mut kick_times = alloc::vec![0.0];
        kick_times.extend(self.kick_times[first + 1..].iter().map(|&t| t - origin));
        Self {
            seed: self.seed,
            delta0: self.delta0,
            kick_times,
            signs: self.signs[first..].to_vec(),
        }
    }
}

/// Draws kick times on `[0, tau_end]` from `seed`.
pub fn sample_noise(seed: u64, delta0: f64, tau_r: f64, tau_end: f64) -> Result<NoiseRealization> {
    if !(delta0 >= 0.0 && delta0.is_finite()) {
        return Err(Error::Domain {
            name: "delta0",
            value: delta0,
            reason: "noise amplitude must be finite and non-negative",
        });
    }
    crate::params::positive("tau_r", tau_r)?;
    crate::params::positive("tau_end", tau_end)?;

    let mut rng = seeded_rng(seed);
    let mut kick_times = alloc::vec![0.0];
    let mut signs = alloc::vec![1i8];
    let mut t = 0.0;
    loop {
        t += draw_interval(&mut rng, tau_r);
        if t > tau_end {
            break;
        }
        let last = *signs.last().unwrap_or(&1);
        kick_times.push(t);
        signs.push(-last);
    }
    Ok(NoiseRealization {
        seed,
        delta0,
        kick_times,
        signs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn signs_alternate_from_plus() {
        let n = sample_noise(7, 0.3, 2.0 * PI / 10.0, 60.0).unwrap();
        assert_eq!(n.signs[0], 1);
        assert!(n.signs.windows(2).all(|w| w[0] == -w[1]));
        assert!(n.kick_times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(n.kick_times[0], 0.0);
        assert!(*n.kick_times.last().unwrap() <= 60.0);
        assert_eq!(n.value_at(0.0), 0.3);
        assert_eq!(n.value_at(n.kick_times[1]), -0.3);
        assert_eq!(n.value_at(0.5 * n.kick_times[1]), 0.3);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let a = sample_noise(42, 0.2, 0.6, 100.0).unwrap();
        let b = sample_noise(42, 0.2, 0.6, 100.0).unwrap();
        assert_eq!(a, b);
        let c = sample_noise(43, 0.2, 0.6, 100.0).unwrap();
        assert_ne!(a.kick_times, c.kick_times);
    }

    #[test]
    fn zero_amplitude_is_silent() {
        let n = sample_noise(1, 0.0, 0.6, 10.0).unwrap();
        assert!(n.kick_times.iter().all(|&t| n.value_at(t) == 0.0));
    }

    #[test]
    fn shifted_view_agrees() {
        let n = sample_noise(11, 0.2, 0.6, 30.0).unwrap();
        for origin in [0.0, 0.3, n.kick_times[3], 17.2] {
            let s = n.shifted(origin);
            assert_eq!(s.kick_times[0], 0.0);
            for k in 0..200 {
                let t = k as f64 * 0.061;
                assert_eq!(s.value_at(t), n.value_at(origin + t));
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(sample_noise(1, -0.1, 0.6, 10.0).is_err());
        assert!(sample_noise(1, 0.1, 0.6, 0.0).is_err());
    }

    #[test]
    fn accepted_interval_statistics() {
        // Uniform on (0, 5τ_R/4) after rejection: mean 5τ_R/8, variance (5τ_R/4)²/12.
        let tau_r = 2.0 * PI / 10.0;
        let mut rng = seeded_rng(2024);
        let draws = 1_000_000;
        let mut sum = 0.0;
        let mut max = 0.0f64;
        for _ in 0..draws {
            let dt = draw_interval(&mut rng, tau_r);
            assert!(dt > 0.0);
            max = max.max(dt);
            sum += dt;
        }
        let mean = sum / draws as f64;
        let sigma = (1.25 * tau_r) / 12f64.sqrt() / (draws as f64).sqrt();
        assert!((mean - 0.625 * tau_r).abs() < 5.0 * sigma, "mean {mean}");
        assert!(max < 1.25 * tau_r);
    }

    #[test]
    fn realization_seeds_are_order_independent() {
        let forward: Vec<u64> = (0..8).map(|i| realization_seed(99, i)).collect();
        let backward: Vec<u64> = (0..8).rev().map(|i| realization_seed(99, i)).collect();
        assert!(forward.iter().eq(backward.iter().rev()));
        let mut sorted = forward.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 8);
    }
}
