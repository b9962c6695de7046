//! Replicated collect / weight / fit / evaluate sweeps.

use serde::{Deserialize, Serialize};

use super::risk::TestSet;
use super::stats::{mean, standard_error};
use crate::collector::{collect, ExplorationSchedule, GreedyModelSpec};
use crate::dataset::ReferenceWeight;
use crate::env::{EnvSpec, Environment};
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, ExecMode};
use crate::learners::{design_matrix, fit_design, FeatureMap, FeatureMode, ModelKind, ModelSpec};
use crate::seed::{child_seed, stage};
use crate::weights::{compute_weights_with, WeightScheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub schedule: ExplorationSchedule,
    pub greedy: GreedyModelSpec,
    pub schemes: Vec<WeightScheme>,
    pub models: Vec<ModelSpec>,
    /// Horizons, strictly increasing.
    pub horizons: Vec<usize>,
    pub n_reps: usize,
    pub seed: u64,
    pub test_size: usize,
    pub gstar: ReferenceWeight,
    #[serde(skip)]
    pub exec: ExecMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: EnvSpec::default(),
            schedule: ExplorationSchedule::default(),
            greedy: GreedyModelSpec::default(),
            schemes: WeightScheme::ALL.to_vec(),
            models: ModelKind::BENCH.iter().map(|k| ModelSpec::of_kind(*k)).collect(),
            horizons: vec![1000],
            n_reps: 8,
            seed: 0,
            test_size: 1000,
            gstar: ReferenceWeight::ConstantOne,
            exec: ExecMode::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.horizons.is_empty() {
            return Err(Error::Config("horizons must not be empty".into()));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("horizons must be strictly increasing".into()));
        }
        if self.n_reps == 0 {
            return Err(Error::Config("n_reps must be at least 1".into()));
        }
        if self.schemes.is_empty() || self.models.is_empty() {
            return Err(Error::Config("need at least one scheme and one model".into()));
        }
        if self.test_size < 2 {
            return Err(Error::Config("test_size must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRow {
    pub scheme: WeightScheme,
    pub model: ModelKind,
    pub beta: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub rep: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggRow {
    pub scheme: WeightScheme,
    pub model: ModelKind,
    pub beta: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub mean: f64,
    /// `None` with a single replication.
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<RepRow>,
    pub aggregate: Vec<AggRow>,
}

impl ExperimentResult {
    pub fn find(&self, scheme: WeightScheme, model: ModelKind, horizon: usize) -> Option<&AggRow> {
        self.aggregate
            .iter()
            .find(|r| r.scheme == scheme && r.model == model && r.horizon == horizon)
    }

    /// Losses of one (scheme, model, T) cell, indexed by replication.
    pub fn losses(&self, scheme: WeightScheme, model: ModelKind, horizon: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.scheme == scheme && r.model == model && r.horizon == horizon)
            .map(|r| r.loss)
            .collect()
    }
}

/// Outcome of comparing ISWERM with another scheme under the 1-SE rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Better,
    Worse,
    Indistinguishable,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Better => "better",
            Verdict::Worse => "worse",
            Verdict::Indistinguishable => "indistinguishable",
        }
    }

    /// Lower loss is better. The two `mean +- se` bars must be disjoint for
    /// a verdict other than indistinguishable; a missing SE counts as zero.
    pub fn of(mean: f64, se: Option<f64>, other_mean: f64, other_se: Option<f64>) -> Verdict {
        let (a, b) = (se.unwrap_or(0.0), other_se.unwrap_or(0.0));
        if mean + a < other_mean - b {
            Verdict::Better
        } else if mean - a > other_mean + b {
            Verdict::Worse
        } else {
            Verdict::Indistinguishable
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub model: ModelKind,
    /// The scheme ISWERM is compared against.
    pub scheme: WeightScheme,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub verdict: Verdict,
}

/// ISWERM against every other scheme, per model and horizon.
pub fn compare_schemes(result: &ExperimentResult) -> Vec<Comparison> {
    let mut out = Vec::new();
    for is in result.aggregate.iter().filter(|r| r.scheme == WeightScheme::Iswerm) {
        for other in result
            .aggregate
            .iter()
            .filter(|r| r.scheme != WeightScheme::Iswerm && r.model == is.model && r.horizon == is.horizon)
        {
            out.push(Comparison {
                model: is.model,
                scheme: other.scheme,
                horizon: is.horizon,
                verdict: Verdict::of(is.mean, is.se, other.mean, other.se),
            });
        }
    }
    out
}

/// Seeds for replication `rep`: `(collect, test)`.
pub fn rep_seeds(master: u64, rep: usize) -> (u64, u64) {
    (
        child_seed(master, rep as u64, stage::COLLECT),
        child_seed(master, rep as u64, stage::TEST),
    )
}

/// One replication: collect once at the largest horizon and evaluate every
/// prefix, which is identical to a separate collection of that length.
fn run_rep(cfg: &ExperimentConfig, env: &Environment, rep: usize) -> Result<Vec<RepRow>> {
    let (collect_seed, test_seed) = rep_seeds(cfg.seed, rep);
    let t_max = *cfg.horizons.last().expect("validated");
    let ds = collect(env, &cfg.schedule, &cfg.greedy, t_max, collect_seed).map_err(|e| e.at_stage("collect"))?;
    let test = TestSet::draw(env, cfg.test_size, test_seed);
    let y: Vec<f64> = ds.records.iter().map(|r| r.outcome).collect();
    let weights = cfg
        .schemes
        .iter()
        .map(|s| compute_weights_with(*s, &ds, &cfg.gstar))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_stage("weights"))?;
    let mut designs: Vec<(FeatureMode, FeatureMap, Vec<Vec<f64>>)> = Vec::new();
    for m in &cfg.models {
        let mode = m.kind.feature_mode();
        if !designs.iter().any(|(md, _, _)| *md == mode) {
            let map = FeatureMap::new(mode, ds.context_dim, ds.num_arms);
            designs.push((mode, map, design_matrix(&ds, &map)?));
        }
    }
    let mut out = Vec::new();
    for &t in &cfg.horizons {
        for (scheme, w) in cfg.schemes.iter().zip(&weights) {
            for spec in &cfg.models {
                let (_, map, x) = designs
                    .iter()
                    .find(|(md, _, _)| *md == spec.kind.feature_mode())
                    .expect("built above");
                let fit = fit_design(spec, *map, &x[..t], &y[..t], &w[..t])
                    .map_err(|e| e.at_stage(&format!("fit {scheme}/{}", spec.kind)))?;
                out.push(RepRow {
                    scheme: *scheme,
                    model: spec.kind,
                    beta: cfg.schedule.beta,
                    horizon: t,
                    rep,
                    loss: test.mse(&fit.model).value,
                });
            }
        }
    }
    Ok(out)
}

pub fn aggregate(rows: &[RepRow], schemes: &[WeightScheme], models: &[ModelKind], horizons: &[usize]) -> Vec<AggRow> {
    let mut out = Vec::new();
    let beta = rows.first().map_or(f64::NAN, |r| r.beta);
    for &scheme in schemes {
        for &model in models {
            for &t in horizons {
                let l: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.scheme == scheme && r.model == model && r.horizon == t)
                    .map(|r| r.loss)
                    .collect();
                out.push(AggRow {
                    scheme,
                    model,
                    beta,
                    horizon: t,
                    mean: mean(&l),
                    se: standard_error(&l),
                });
            }
        }
    }
    out
}

pub fn replicate_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let env = cfg.env.build().map_err(|e| e.at_stage("environment"))?;
    replicate_on(cfg, &env)
}

/// As [`replicate_experiment`] with a prebuilt environment.
pub fn replicate_on(cfg: &ExperimentConfig, env: &Environment) -> Result<ExperimentResult> {
    cfg.validate()?;
    let per_rep = try_map_indexed(cfg.n_reps, cfg.exec, |rep| {
        run_rep(cfg, env, rep).map_err(|e| e.at_rep(rep))
    })?;
    let rows: Vec<RepRow> = per_rep.into_iter().flatten().collect();
    let models: Vec<ModelKind> = cfg.models.iter().map(|m| m.kind).collect();
    let aggregate = aggregate(&rows, &cfg.schemes, &models, &cfg.horizons);
    Ok(ExperimentResult { rows, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            env: EnvSpec::Linear {
                d: 2,
                k: 3,
                seed: 3,
                noise: 0.5,
            },
            horizons: vec![60, 120],
            n_reps: 3,
            test_size: 200,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn verdicts() {
        assert_eq!(Verdict::of(1.0, Some(0.1), 1.5, Some(0.1)), Verdict::Better);
        assert_eq!(Verdict::of(1.5, Some(0.1), 1.0, Some(0.1)), Verdict::Worse);
        assert_eq!(Verdict::of(1.0, Some(0.3), 1.5, Some(0.3)), Verdict::Indistinguishable);
        assert_eq!(Verdict::of(1.0, None, 1.0, None), Verdict::Indistinguishable);
    }

    #[test]
    fn single_rep_has_no_se() {
        let cfg = ExperimentConfig {
            n_reps: 1,
            schemes: vec![WeightScheme::Iswerm],
            ..small()
        };
        let r = replicate_experiment(&cfg).unwrap();
        assert!(r.aggregate.iter().all(|a| a.se.is_none()));
        assert_eq!(r.aggregate.len(), 3 * 2);
    }

    #[test]
    fn deterministic_and_schedule_independent() {
        let cfg = small();
        let a = replicate_experiment(&cfg).unwrap();
        let b = replicate_experiment(&ExperimentConfig {
            exec: ExecMode::Sequential,
            ..cfg.clone()
        })
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 3 * 2 * 7 * 3);
    }

    #[test]
    fn constant_exploration_makes_iswerm_equal_unweighted() {
        let cfg = ExperimentConfig {
            schedule: ExplorationSchedule::new(0.0, 0.0).unwrap(),
            schemes: vec![WeightScheme::Unweighted, WeightScheme::Iswerm, WeightScheme::IsFloor],
            models: vec![ModelSpec::of_kind(ModelKind::Wls), ModelSpec::of_kind(ModelKind::Cart)],
            ..small()
        };
        let r = replicate_experiment(&cfg).unwrap();
        for model in [ModelKind::Wls, ModelKind::Cart] {
            for t in [60, 120] {
                let u = r.losses(WeightScheme::Unweighted, model, t);
                let i = r.losses(WeightScheme::Iswerm, model, t);
                let f = r.losses(WeightScheme::IsFloor, model, t);
                for ((u, i), f) in u.iter().zip(&i).zip(&f) {
                    assert!((u - i).abs() <= 1e-9 * u.abs().max(1.0), "{model}: {u} vs {i}");
                    assert_eq!(i, f);
                }
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = small();
        c.horizons = vec![];
        assert!(replicate_experiment(&c).is_err());
        c.horizons = vec![100, 50];
        assert!(replicate_experiment(&c).is_err());
        c.horizons = vec![100];
        c.n_reps = 0;
        assert!(replicate_experiment(&c).is_err());
    }
}
