//! Seeded discrete environments and random functions for the checks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Context;
use crate::env::DiscreteEnv;
use crate::error::Result;
use crate::seed::{child_rng, stage};

/// Random probabilities and `mu ~ U[-1, 1]` on the indexed support.
pub fn random_discrete_env(n_ctx: usize, num_arms: usize, seed: u64, noise_std: f64) -> Result<DiscreteEnv> {
    let mut rng = child_rng(seed, 0, stage::ENV);
    let raw: Vec<f64> = (0..n_ctx).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
    let head: f64 = probs[..n_ctx - 1].iter().sum();
    probs[n_ctx - 1] = 1.0 - head;
    let mu = (0..n_ctx)
        .map(|_| (0..num_arms).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    DiscreteEnv::with_noise(DiscreteEnv::indexed_support(n_ctx), probs, mu, noise_std)
}

/// Shape of the gap distribution near zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuProfile {
    /// Gaps evenly spread over `(0, 1]`: `Pr(gap <= u)` grows linearly.
    One,
    /// `Pr(gap <= u)` grows quadratically.
    Two,
    /// Every gap at least 1/2.
    Infinite,
}

impl NuProfile {
    pub fn nu(&self) -> f64 {
        match self {
            NuProfile::One => 1.0,
            NuProfile::Two => 2.0,
            NuProfile::Infinite => f64::INFINITY,
        }
    }
}

/// Noise-free environment on equiprobable contexts `x = i` whose best-arm
/// gaps follow `profile`.
pub fn gap_profile_env(profile: NuProfile, n_ctx: usize, num_arms: usize, seed: u64) -> Result<DiscreteEnv> {
    let mut rng = child_rng(seed, 0, stage::ENV);
    let n = n_ctx as f64;
    let mut mu = Vec::with_capacity(n_ctx);
    for i in 0..n_ctx {
        let q = (i + 1) as f64 / n;
        let gap = match profile {
            NuProfile::One => q,
            NuProfile::Two => q.sqrt(),
            NuProfile::Infinite => rng.random_range(0.5..=1.0),
        };
        let base: f64 = rng.random_range(-0.5..=0.5);
        let best = rng.random_range(0..num_arms);
        let second = (best + 1 + rng.random_range(0..num_arms - 1)) % num_arms;
        let row: Vec<f64> = (0..num_arms)
            .map(|a| {
                if a == best {
                    base
                } else if a == second {
                    base + gap
                } else {
                    base + gap + rng.random_range(0.0..=0.5)
                }
            })
            .collect();
        mu.push(row);
    }
    let support = (0..n_ctx).map(|i| Context(vec![i as f64])).collect();
    DiscreteEnv::with_noise(support, vec![1.0 / n; n_ctx], mu, 0.0)
}

/// Rows on the simplex; about one row in five is a random vertex.
pub fn random_simplex_table<R: Rng + ?Sized>(n_ctx: usize, num_arms: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n_ctx)
        .map(|_| {
            if rng.random_bool(0.2) {
                let a = rng.random_range(0..num_arms);
                return (0..num_arms).map(|b| if a == b { 1.0 } else { 0.0 }).collect();
            }
            let raw: Vec<f64> = (0..num_arms).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        })
        .collect()
}

/// Tables with entries uniform on `[lo, hi]`.
pub fn random_tables<R: Rng + ?Sized>(
    count: usize,
    n_ctx: usize,
    num_arms: usize,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Vec<Vec<Vec<f64>>> {
    (0..count)
        .map(|_| {
            (0..n_ctx)
                .map(|_| (0..num_arms).map(|_| rng.random_range(lo..=hi)).collect())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_have_unique_argmin_and_requested_gaps() {
        for p in [NuProfile::One, NuProfile::Two, NuProfile::Infinite] {
            let e = gap_profile_env(p, 40, 3, 1).unwrap();
            assert!(e.has_unique_argmin());
            let min_gap = (0..e.len()).map(|i| e.arm_gap(i)).fold(f64::INFINITY, f64::min);
            match p {
                NuProfile::Infinite => assert!(min_gap >= 0.5),
                _ => assert!(min_gap > 0.0 && min_gap <= 0.16),
            }
        }
    }

    #[test]
    fn random_env_is_valid_and_seeded() {
        let a = random_discrete_env(5, 3, 9, 0.0).unwrap();
        let b = random_discrete_env(5, 3, 9, 0.0).unwrap();
        assert_eq!(a.mu, b.mu);
        assert!((a.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
