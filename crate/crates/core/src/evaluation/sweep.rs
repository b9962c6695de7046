//! Convergence-rate sweeps: replicate learning over a grid of horizons and
//! exploration exponents, then fit the log-log slope of the mean loss.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use super::rate::{fit_rate_replicated, RateFit};
use super::risk::excess_risk;
use super::stats::{mean, standard_error};
use crate::collector::{collect, ExplorationSchedule, GreedyModelSpec};
use crate::dataset::{LoggedDataset, ReferenceWeight};
use crate::env::{EnvSpec, Environment, LossKind};
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, ExecMode};
use crate::learners::{
    design_matrix, fit_design, fit_policy_iswerm, FeatureMap, FinitePolicyClass, FiniteRiskAccumulator, LinearModel,
    ModelKind, ModelSpec, NormalEquations, PolicyClass, TreePolicyClass,
};
use crate::seed::{child_seed, stage};
use crate::weights::{compute_weights_with, WeightScheme};

/// Policy class description resolved against the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyClassSpec {
    /// All lookup tables over a discrete support. Contexts listed in
    /// `pinned` as `[context, arm]` and in `pin_optimal` are held fixed.
    Tables {
        #[serde(default)]
        pinned: Vec<[usize; 2]>,
        #[serde(default)]
        pin_optimal: Vec<usize>,
    },
    /// JSON array of policies.
    File { path: PathBuf },
    Tree {
        max_depth: usize,
        #[serde(default = "default_grid")]
        grid_size: usize,
    },
}

fn default_grid() -> usize {
    TreePolicyClass::DEFAULT_GRID
}

impl PolicyClassSpec {
    pub fn build(&self, env: &Environment) -> Result<PolicyClass> {
        match self {
            PolicyClassSpec::Tables { pinned, pin_optimal } => {
                let d = env.as_discrete().ok_or(Error::NotDiscrete)?;
                let mut fixed = vec![None; d.len()];
                for &[i, a] in pinned {
                    if i >= d.len() || a >= d.num_arms() {
                        return Err(Error::Config(format!("pinned entry [{i}, {a}] out of range")));
                    }
                    fixed[i] = Some(a);
                }
                for &i in pin_optimal {
                    if i >= d.len() {
                        return Err(Error::Config(format!("pin_optimal context {i} out of range")));
                    }
                    fixed[i] = Some(d.optimal_arm(i));
                }
                Ok(PolicyClass::Finite(FinitePolicyClass::all_tables(&d.support, d.num_arms(), &fixed)?))
            }
            PolicyClassSpec::File { path } => Ok(PolicyClass::Finite(FinitePolicyClass::load(path)?)),
            PolicyClassSpec::Tree { max_depth, grid_size } => Ok(PolicyClass::Tree(TreePolicyClass {
                max_depth: *max_depth,
                thresholds: None,
                grid_size: *grid_size,
            })),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepTask {
    /// Policy learning; the loss is exact (or Monte Carlo) regret.
    Policy { class: PolicyClassSpec },
    /// Regression; the loss is excess squared-loss risk over all functions.
    Regression { model: ModelSpec },
}

impl Default for SweepTask {
    fn default() -> Self {
        SweepTask::Policy {
            class: PolicyClassSpec::Tables {
                pinned: Vec::new(),
                pin_optimal: Vec::new(),
            },
        }
    }
}

/// Margin parameters for the fast-rate comparison of policy learning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginSpec {
    pub nu: f64,
    /// Entropy exponent of the class; 0 for finite classes.
    #[serde(default)]
    pub p: f64,
}

impl MarginSpec {
    /// `-(1 - beta)(1 + nu) / (2 + nu (1 + p/2))`, the `nu -> inf` limit
    /// when `nu` is infinite.
    pub fn exponent(&self, beta: f64) -> f64 {
        let e = if self.nu.is_infinite() {
            1.0 / (1.0 + self.p / 2.0)
        } else {
            (1.0 + self.nu) / (2.0 + self.nu * (1.0 + self.p / 2.0))
        };
        -(1.0 - beta) * e
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSweepConfig {
    pub env: EnvSpec,
    pub betas: Vec<f64>,
    pub horizons: Vec<usize>,
    pub n_reps: usize,
    pub seed: u64,
    pub greedy: GreedyModelSpec,
    pub scheme: WeightScheme,
    pub gstar: ReferenceWeight,
    pub task: SweepTask,
    pub margin: Option<MarginSpec>,
    /// Leave the smallest horizon out of the slope fit, where the warm
    /// start still dominates.
    pub fit_skip_smallest: bool,
    pub n_boot: usize,
    pub level: f64,
    #[serde(skip)]
    pub exec: ExecMode,
}

impl Default for RateSweepConfig {
    fn default() -> Self {
        RateSweepConfig {
            env: EnvSpec::default(),
            betas: vec![0.0, 1.0 / 3.0],
            horizons: (9..=15).map(|e| 1usize << e).collect(),
            n_reps: 200,
            seed: 0,
            greedy: GreedyModelSpec::default(),
            scheme: WeightScheme::Iswerm,
            gstar: ReferenceWeight::ConstantOne,
            task: SweepTask::default(),
            margin: None,
            fit_skip_smallest: true,
            n_boot: 1000,
            level: 0.95,
            exec: ExecMode::default(),
        }
    }
}

impl RateSweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() {
            return Err(Error::Config("horizons must not be empty".into()));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("horizons must be strictly increasing".into()));
        }
        if self.betas.is_empty() {
            return Err(Error::Config("betas must not be empty".into()));
        }
        for &b in &self.betas {
            ExplorationSchedule::new(b, 0.0).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.n_reps == 0 {
            return Err(Error::Config("n_reps must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config("level must lie in (0, 1)".into()));
        }
        if let Some(m) = self.margin {
            if !(m.nu > 0.0) || !(m.p >= 0.0 && m.p < 2.0) {
                return Err(Error::Config("margin needs nu > 0 and 0 <= p < 2".into()));
            }
            if !matches!(self.task, SweepTask::Policy { .. }) {
                return Err(Error::Config("margin parameters apply to policy sweeps only".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub rep: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFit {
    pub beta: f64,
    pub mean_loss: Vec<f64>,
    pub se: Vec<f64>,
    /// `None` when the mean loss is zero at some horizon.
    pub fit: Option<RateFit>,
    /// Horizons entering the fit.
    pub fit_horizons: Vec<usize>,
    /// `-(1 - beta)/2` for policies, `-(1 - beta)` for regression.
    pub target: f64,
    pub fast_target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSweepResult {
    pub horizons: Vec<usize>,
    pub rows: Vec<SweepRow>,
    pub fits: Vec<SweepFit>,
}

/// Learning state shared by the replications.
enum Learner {
    Finite { class: FinitePolicyClass, regret: Vec<f64> },
    Tree(PolicyClass),
    Regression(ModelSpec),
}

fn exact_regrets(class: &FinitePolicyClass, env: &Environment, gstar: &ReferenceWeight) -> Result<Vec<f64>> {
    class
        .policies
        .iter()
        .map(|p| {
            p.check(env.num_arms(), env.context_dim())?;
            Ok(excess_risk(p, env, gstar, LossKind::PolicyValue)?.value)
        })
        .collect()
}

pub fn run_rate_sweep(cfg: &RateSweepConfig) -> Result<RateSweepResult> {
    cfg.validate()?;
    let env = cfg.env.build().map_err(|e| e.at_stage("environment"))?;
    rate_sweep_on(cfg, &env)
}

/// As [`run_rate_sweep`] with a prebuilt environment.
pub fn rate_sweep_on(cfg: &RateSweepConfig, env: &Environment) -> Result<RateSweepResult> {
    cfg.validate()?;
    let learner = match &cfg.task {
        SweepTask::Policy { class } => match class.build(env).map_err(|e| e.at_stage("policy class"))? {
            PolicyClass::Finite(c) => {
                let regret = exact_regrets(&c, env, &cfg.gstar).map_err(|e| e.at_stage("regret"))?;
                Learner::Finite { class: c, regret }
            }
            tree => Learner::Tree(tree),
        },
        SweepTask::Regression { model } => Learner::Regression(model.clone()),
    };
    if cfg.margin.is_some() {
        let realizable = match &learner {
            Learner::Finite { regret, .. } => regret.iter().any(|r| r.abs() <= 1e-12),
            _ => false,
        };
        if !realizable || env.as_discrete().is_none() {
            return Err(Error::Config(
                "fast-rate comparison needs a finite class containing the optimal policy on a discrete environment"
                    .into(),
            ));
        }
    }
    let t_max = *cfg.horizons.last().expect("validated");
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (bi, &beta) in cfg.betas.iter().enumerate() {
        let schedule = ExplorationSchedule::new(beta, 0.0)?;
        let base = child_seed(cfg.seed, bi as u64, stage::POLICY);
        let per_rep = try_map_indexed(cfg.n_reps, cfg.exec, |rep| {
            let seed = child_seed(base, rep as u64, stage::COLLECT);
            let ds = collect(env, &schedule, &cfg.greedy, t_max, seed)
                .map_err(|e| e.at_stage("collect").at_rep(rep))?;
            rep_losses(cfg, env, &learner, &ds).map_err(|e| e.at_rep(rep))
        })?;
        for (rep, losses) in per_rep.iter().enumerate() {
            for (&t, &loss) in cfg.horizons.iter().zip(losses) {
                rows.push(SweepRow {
                    beta,
                    horizon: t,
                    rep,
                    loss,
                });
            }
        }
        let column = |j: usize| per_rep.iter().map(|r| r[j]).collect::<Vec<f64>>();
        let mean_loss: Vec<f64> = (0..cfg.horizons.len()).map(|j| mean(&column(j))).collect();
        let se = (0..cfg.horizons.len())
            .map(|j| standard_error(&column(j)).unwrap_or(0.0))
            .collect();
        let skip = usize::from(cfg.fit_skip_smallest && cfg.horizons.len() > 3);
        let fit = if cfg.horizons.len() - skip >= 3 && mean_loss[skip..].iter().all(|m| *m > 0.0) {
            let t: Vec<f64> = cfg.horizons[skip..].iter().map(|&h| h as f64).collect();
            let tail: Vec<Vec<f64>> = per_rep.iter().map(|r| r[skip..].to_vec()).collect();
            Some(fit_rate_replicated(&t, &tail, cfg.n_boot, cfg.level, base)?)
        } else {
            None
        };
        let target = match cfg.task {
            SweepTask::Policy { .. } => -(1.0 - beta) / 2.0,
            SweepTask::Regression { .. } => -(1.0 - beta),
        };
        fits.push(SweepFit {
            beta,
            mean_loss,
            se,
            fit,
            fit_horizons: cfg.horizons[skip..].to_vec(),
            target,
            fast_target: cfg.margin.map(|m| m.exponent(beta)),
        });
    }
    Ok(RateSweepResult {
        horizons: cfg.horizons.clone(),
        rows,
        fits,
    })
}

/// Loss of the learned model at every horizon, from prefixes of `ds`.
fn rep_losses(cfg: &RateSweepConfig, env: &Environment, learner: &Learner, ds: &LoggedDataset) -> Result<Vec<f64>> {
    let weights = compute_weights_with(cfg.scheme, ds, &cfg.gstar).map_err(|e| e.at_stage("weights"))?;
    let sign = env.cost_sign();
    let mut out = Vec::with_capacity(cfg.horizons.len());
    match learner {
        Learner::Finite { class, regret } => {
            let mut acc = FiniteRiskAccumulator::new(class);
            let mut next = 0;
            for (t, (r, w)) in ds.records.iter().zip(&weights).enumerate() {
                acc.push(&r.context, r.action, w * sign * r.outcome);
                if t + 1 == cfg.horizons[next] {
                    out.push(regret[acc.best().index.expect("finite class")]);
                    next += 1;
                    if next == cfg.horizons.len() {
                        break;
                    }
                }
            }
        }
        Learner::Tree(class) => {
            for &t in &cfg.horizons {
                let fit = fit_policy_iswerm(&ds.prefix(t), &weights[..t], class, sign)
                    .map_err(|e| e.at_stage("policy fit"))?;
                out.push(excess_risk(&fit.policy, env, &cfg.gstar, LossKind::PolicyValue)?.value);
            }
        }
        Learner::Regression(spec) => {
            let map = FeatureMap::new(spec.kind.feature_mode(), ds.context_dim, ds.num_arms);
            let x = design_matrix(ds, &map)?;
            let y: Vec<f64> = ds.records.iter().map(|r| r.outcome).collect();
            if spec.kind == ModelKind::Wls {
                // Normal equations grow with the prefix.
                let lambda = spec.lambda.unwrap_or(0.0);
                let mut ne = NormalEquations::new(map.dim());
                let mut next = 0;
                for t in 0..ds.len() {
                    ne.add(&x[t], y[t], weights[t]);
                    if t + 1 == cfg.horizons[next] {
                        let theta = ne.solve(lambda, false).map_err(|e| e.at_stage("fit"))?;
                        let model = LinearModel::new(theta, map)?;
                        out.push(excess_risk(&model, env, &cfg.gstar, LossKind::Squared)?.value);
                        next += 1;
                        if next == cfg.horizons.len() {
                            break;
                        }
                    }
                }
            } else {
                for &t in &cfg.horizons {
                    let fit = fit_design(spec, map, &x[..t], &y[..t], &weights[..t]).map_err(|e| e.at_stage("fit"))?;
                    out.push(excess_risk(&fit.model, env, &cfg.gstar, LossKind::Squared)?.value);
                }
            }
        }
    }
    Ok(out)
}
