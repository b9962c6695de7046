//! Named batteries of checks, as run by the command line.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    check_is_unbiasedness, check_is_unbiasedness_logged, check_lipschitz_square_loss, check_margin_variance_bound,
    check_square_loss_variance_bound, epsilon_greedy_table, gap_profile_env, random_discrete_env,
    random_simplex_table, random_tables, sup_process_scaling, symmetric_class, BoxClass, CheckReport, NuProfile,
    SupScalingConfig,
};
use crate::dataset::ReferenceWeight;
use crate::env::LossKind;
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::seed::{child_rng, child_seed, stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Unbiasedness,
    Lemma2,
    Lemma3,
    Supscaling,
    All,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Unbiasedness => "unbiasedness",
            Suite::Lemma2 => "lemma2",
            Suite::Lemma3 => "lemma3",
            Suite::Supscaling => "supscaling",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unbiasedness" => Ok(Suite::Unbiasedness),
            "lemma2" => Ok(Suite::Lemma2),
            "lemma3" => Ok(Suite::Lemma3),
            "supscaling" => Ok(Suite::Supscaling),
            "all" => Ok(Suite::All),
            other => Err(Error::invalid(format!(
                "unknown suite '{other}' (expected unbiasedness, lemma2, lemma3, supscaling or all)"
            ))),
        }
    }
}

/// Sizes of the batteries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryConfig {
    /// Random logging-policy sequences for the unbiasedness identity.
    pub logging_sequences: usize,
    /// Rounds per logging sequence.
    pub sequence_length: usize,
    /// Seeded environments for the variance bound.
    pub variance_envs: usize,
    pub variance_functions: usize,
    pub lipschitz_triples: usize,
    pub margin_policies: usize,
    pub margin_contexts: usize,
    /// Random tables in the sup-process class; the class also holds their
    /// negations.
    pub sup_tables: usize,
    pub sup: SupScalingConfig,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig {
            logging_sequences: 20,
            sequence_length: 50,
            variance_envs: 3,
            variance_functions: 1000,
            lipschitz_triples: 100_000,
            margin_policies: 500,
            margin_contexts: 40,
            sup_tables: 4,
            sup: SupScalingConfig::default(),
        }
    }
}

pub fn run_suite(suite: Suite, seed: u64, cfg: &TheoryConfig, exec: ExecMode) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Unbiasedness {
        out.extend(unbiasedness(seed, cfg)?);
    }
    if all || suite == Suite::Lemma2 {
        out.extend(lemma2(seed, cfg)?);
    }
    if all || suite == Suite::Lemma3 {
        out.extend(lemma3(seed, cfg)?);
    }
    if all || suite == Suite::Supscaling {
        out.extend(supscaling(seed, cfg, exec)?);
    }
    Ok(out)
}

/// Random epsilon-greedy sequences with random greedy arms and rates, plus
/// a negative control with propensities misrecorded by 10%.
fn unbiasedness(seed: u64, cfg: &TheoryConfig) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    let gstars = [ReferenceWeight::ConstantOne, ReferenceWeight::UniformDensity, ReferenceWeight::Dirac(0)];
    for s in 0..cfg.logging_sequences {
        let env = random_discrete_env(5, 3, child_seed(seed, s as u64, "unbiased-env"), 0.5)?;
        let mut rng = child_rng(seed, s as u64, stage::CHECK);
        let seq = (0..cfg.sequence_length)
            .map(|_| {
                let greedy: Vec<usize> = (0..env.len()).map(|_| rng.random_range(0..3)).collect();
                epsilon_greedy_table(&greedy, rng.random_range(0.01..=1.0), 3)
            })
            .collect::<Result<Vec<_>>>()?;
        let f = random_tables(1, env.len(), 3, -2.0, 2.0, &mut rng).remove(0);
        let gstar = gstars[s % gstars.len()];
        for loss in [LossKind::Squared, LossKind::PolicyValue] {
            let mut r = check_is_unbiasedness(&env, &seq, &f, &gstar, loss)?;
            r.name = format!("is-unbiasedness[seq={s},{loss:?}]");
            out.push(r);
        }
    }
    let env = random_discrete_env(5, 3, child_seed(seed, 0, "unbiased-control"), 0.5)?;
    let seq = vec![epsilon_greedy_table(&[0, 1, 2, 0, 1], 0.3, 3)?; cfg.sequence_length.max(1)];
    let bad: Vec<Vec<Vec<f64>>> = seq
        .iter()
        .map(|g| g.iter().map(|r| r.iter().map(|p| (p * 1.1).min(1.0)).collect()).collect())
        .collect();
    let f = vec![vec![1.0; 3]; env.len()];
    let control = check_is_unbiasedness_logged(&env, &seq, &bad, &f, &ReferenceWeight::ConstantOne, LossKind::Squared)?;
    out.push(CheckReport {
        name: "is-unbiasedness-negative-control".into(),
        passed: !control.passed,
        statistic: control.statistic,
        threshold: control.threshold,
        details: json!({ "expect": "the corrupted check fails", "corrupted": control.details }),
    });
    Ok(out)
}

fn lemma2(seed: u64, cfg: &TheoryConfig) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for e in 0..cfg.variance_envs {
        let env = random_discrete_env(6, 3, child_seed(seed, e as u64, "lemma2-env"), 0.0)?;
        let class = BoxClass::uniform(6, 3, -0.75, 0.75);
        let f1 = class.minimizer(&env);
        let fs = class.sample(cfg.variance_functions, &mut child_rng(seed, e as u64, stage::CHECK));
        for gstar in [ReferenceWeight::ConstantOne, ReferenceWeight::UniformDensity] {
            let mut r = check_square_loss_variance_bound(&env, &gstar, &class, &fs, &f1)?;
            r.name = format!("square-loss-variance-bound[env={e},{gstar:?}]");
            out.push(r);
        }
    }
    let mut r = check_lipschitz_square_loss(2.0, cfg.lipschitz_triples, seed)?;
    if let serde_json::Value::Object(m) = &mut r.details {
        m.insert(
            "note".into(),
            json!("the stated constant sqrt(M) fails at the corners; 4*sqrt(M) is checked"),
        );
    }
    out.push(r);
    Ok(out)
}

fn lemma3(seed: u64, cfg: &TheoryConfig) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for (pi, profile) in [NuProfile::One, NuProfile::Two, NuProfile::Infinite].into_iter().enumerate() {
        let env = gap_profile_env(profile, cfg.margin_contexts, 3, child_seed(seed, pi as u64, "lemma3-env"))?;
        let mut rng = child_rng(seed, pi as u64, stage::CHECK);
        let policies: Vec<_> = (0..cfg.margin_policies)
            .map(|_| random_simplex_table(env.len(), 3, &mut rng))
            .collect();
        let r = check_margin_variance_bound(&env, profile.nu(), &policies, &ReferenceWeight::ConstantOne)?;
        let tag = match profile {
            NuProfile::One => "nu=1",
            NuProfile::Two => "nu=2",
            NuProfile::Infinite => "nu=inf",
        };
        let mut chain = r.chain;
        chain.name = format!("{}[{tag}]", chain.name);
        let mut l2 = r.l2;
        l2.name = format!("{}[{tag}]", l2.name);
        out.push(chain);
        out.push(l2);
    }
    Ok(out)
}

fn supscaling(seed: u64, cfg: &TheoryConfig, exec: ExecMode) -> Result<Vec<CheckReport>> {
    let env = random_discrete_env(4, 3, child_seed(seed, 0, "sup-env"), 1.0)?;
    let tables = random_tables(cfg.sup_tables, env.len(), 3, -1.0, 1.0, &mut child_rng(seed, 0, "sup-class"));
    let class = symmetric_class(tables);
    let sup = SupScalingConfig {
        seed,
        exec,
        ..cfg.sup.clone()
    };
    let rows = sup_process_scaling(&env, &class, &sup)?;
    Ok(rows
        .into_iter()
        .map(|row| {
            let slope = row.fit.as_ref().map_or(f64::NAN, |f| f.slope);
            CheckReport {
                name: format!("sup-process-scaling[beta={:.4},functions={}]", row.beta, class.len()),
                passed: row.passed,
                statistic: (slope - row.target).abs(),
                threshold: sup.tolerance,
                details: row.details(),
            }
        })
        .collect())
}
