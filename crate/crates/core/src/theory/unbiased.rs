use serde_json::json;

use super::{check_table_shape, CheckReport};
use crate::dataset::ReferenceWeight;
use crate::env::{DiscreteEnv, LossKind};
use crate::error::{Error, Result};

/// Epsilon-greedy logging table for given greedy arms per support point.
pub fn epsilon_greedy_table(greedy: &[usize], epsilon: f64, num_arms: usize) -> Result<Vec<Vec<f64>>> {
    greedy
        .iter()
        .map(|&g| crate::collector::greedy_propensities(g, epsilon, num_arms))
        .collect()
}

/// Conditional expectation of the loss in each cell.
fn expected_loss(env: &DiscreteEnv, f: &[Vec<f64>], loss: LossKind, i: usize, a: usize) -> f64 {
    let mu = env.mu[i][a];
    match loss {
        LossKind::Squared => env.noise_std[i][a].powi(2) + (mu - f[i][a]).powi(2),
        LossKind::PolicyValue => mu * f[i][a],
    }
}

/// Checks `E[(g*/g_t) loss(f, O_t) | past] = P_{g*} loss(f)` at every round
/// when the logged propensities are the true sampling probabilities.
pub fn check_is_unbiasedness(
    env: &DiscreteEnv,
    logging: &[Vec<Vec<f64>>],
    f: &[Vec<f64>],
    gstar: &ReferenceWeight,
    loss: LossKind,
) -> Result<CheckReport> {
    check_is_unbiasedness_logged(env, logging, logging, f, gstar, loss)
}

/// As [`check_is_unbiasedness`], with actions drawn from `sampling[t]` but
/// weighted by `logged[t]`. Differing tables model misrecorded propensities.
pub fn check_is_unbiasedness_logged(
    env: &DiscreteEnv,
    sampling: &[Vec<Vec<f64>>],
    logged: &[Vec<Vec<f64>>],
    f: &[Vec<f64>],
    gstar: &ReferenceWeight,
    loss: LossKind,
) -> Result<CheckReport> {
    let k = env.num_arms();
    gstar.check(k)?;
    check_table_shape(env, f, "f")?;
    if sampling.len() != logged.len() || sampling.is_empty() {
        return Err(Error::invalid("need matching, non-empty sampling and logged sequences"));
    }
    for g in sampling.iter().chain(logged) {
        check_table_shape(env, g, "logging policy")?;
        for row in g {
            if row.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
                return Err(Error::invalid("logging probabilities must lie in (0, 1]"));
            }
        }
    }
    for g in sampling {
        if g.iter().any(|row| (row.iter().sum::<f64>() - 1.0).abs() > 1e-12) {
            return Err(Error::invalid("sampling rows must sum to 1"));
        }
    }
    let target: f64 = (0..env.len())
        .map(|i| {
            env.probs[i]
                * (0..k)
                    .map(|a| gstar.value(a, k) * expected_loss(env, f, loss, i, a))
                    .sum::<f64>()
        })
        .sum();
    let mut worst = 0.0f64;
    let mut worst_t = 0;
    for (t, (g, gl)) in sampling.iter().zip(logged).enumerate() {
        let lhs: f64 = (0..env.len())
            .map(|i| {
                env.probs[i]
                    * (0..k)
                        .map(|a| g[i][a] * (gstar.value(a, k) / gl[i][a]) * expected_loss(env, f, loss, i, a))
                        .sum::<f64>()
            })
            .sum();
        let diff = (lhs - target).abs();
        if diff > worst {
            worst = diff;
            worst_t = t + 1;
        }
    }
    Ok(CheckReport::at_most(
        "is-unbiasedness",
        worst,
        1e-12,
        json!({ "rounds": sampling.len(), "target": target, "worst_round": worst_t }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> DiscreteEnv {
        DiscreteEnv::with_noise(
            DiscreteEnv::indexed_support(2),
            vec![0.4, 0.6],
            vec![vec![1.0, -0.5, 2.0], vec![0.3, 0.0, -1.2]],
            0.7,
        )
        .unwrap()
    }

    #[test]
    fn reference_logging_is_trivially_unbiased() {
        let e = env();
        let uniform = vec![vec![1.0 / 3.0; 3]; 2];
        let f = vec![vec![0.2, 0.1, 0.0], vec![1.0, 0.5, 0.3]];
        let r = check_is_unbiasedness(&e, &[uniform], &f, &ReferenceWeight::UniformDensity, LossKind::Squared).unwrap();
        assert!(r.passed);
        assert!(r.statistic < 1e-15);
    }

    #[test]
    fn epsilon_greedy_by_hand() {
        let e = env();
        let g = epsilon_greedy_table(&[1, 2], 0.3, 3).unwrap();
        let f = vec![vec![0.5, 0.5, 0.5], vec![-1.0, 0.0, 1.0]];
        for loss in [LossKind::Squared, LossKind::PolicyValue] {
            let r = check_is_unbiasedness(&e, &[g.clone()], &f, &ReferenceWeight::ConstantOne, loss).unwrap();
            assert!(r.passed, "{r:?}");
        }
        // Independent hand sum for the policy-value loss with g* = 1.
        let target: f64 = 0.4 * (1.0 * 0.5 - 0.5 * 0.5 + 2.0 * 0.5) + 0.6 * (0.3 * -1.0 + 0.0 + -1.2 * 1.0);
        let r = check_is_unbiasedness(&e, &[g], &f, &ReferenceWeight::ConstantOne, LossKind::PolicyValue).unwrap();
        assert!((r.details["target"].as_f64().unwrap() - target).abs() < 1e-15);
    }

    #[test]
    fn corrupted_propensity_fails() {
        let e = env();
        let g = epsilon_greedy_table(&[0, 0], 0.3, 3).unwrap();
        let bad: Vec<Vec<f64>> = g.iter().map(|r| r.iter().map(|p| (p * 1.1).min(1.0)).collect()).collect();
        let f = vec![vec![1.0; 3]; 2];
        let r = check_is_unbiasedness_logged(&e, &[g], &[bad], &f, &ReferenceWeight::ConstantOne, LossKind::Squared)
            .unwrap();
        assert!(!r.passed);
    }
}
