//! Exact and Monte Carlo checks of the inequalities behind weighted ERM on
//! adaptively collected data.
//!
//! Functions on a discrete environment are tables `values[i][a]` indexed by
//! support point and arm, so every population quantity is a finite sum.

mod envs;
mod bounds;
mod suites;
mod supproc;
mod unbiased;

use serde::{Deserialize, Serialize};

pub use envs::{gap_profile_env, random_discrete_env, random_simplex_table, random_tables, NuProfile};
pub use bounds::{
    check_lipschitz_square_loss, check_margin_variance_bound, check_square_loss_variance_bound,
    margin_constant, outcome_scale, BoxClass, MarginReports,
};
pub use suites::{run_suite, Suite, TheoryConfig};
pub use supproc::{sup_process_scaling, symmetric_class, SupScalingConfig, SupScalingRow};
pub use unbiased::{check_is_unbiasedness, check_is_unbiasedness_logged, epsilon_greedy_table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub details: serde_json::Value,
}

impl CheckReport {
    /// Passes iff `statistic <= threshold`.
    pub fn at_most(name: impl Into<String>, statistic: f64, threshold: f64, details: serde_json::Value) -> Self {
        CheckReport {
            name: name.into(),
            passed: statistic <= threshold,
            statistic,
            threshold,
            details,
        }
    }
}

/// `E[Y^2]` per cell.
pub(crate) fn second_moments(env: &crate::env::DiscreteEnv) -> Vec<Vec<f64>> {
    env.mu
        .iter()
        .zip(&env.noise_std)
        .map(|(m, s)| m.iter().zip(s).map(|(m, s)| m * m + s * s).collect())
        .collect()
}

pub(crate) fn check_table_shape(env: &crate::env::DiscreteEnv, t: &[Vec<f64>], what: &str) -> crate::error::Result<()> {
    if t.len() != env.len() || t.iter().any(|r| r.len() != env.num_arms()) {
        return Err(crate::error::Error::invalid(format!(
            "{what} must have one row of K values per support point"
        )));
    }
    Ok(())
}
