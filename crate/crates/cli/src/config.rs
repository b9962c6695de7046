//! The TOML run configuration. Every section has defaults, so an empty file
//! is a valid config.

use std::path::Path;

use anyhow::{Context as _, Result};
use iswerm_core::collector::{ExplorationSchedule, GreedyModelSpec};
use iswerm_core::env::{EnvSpec, NoiseSpec};
use iswerm_core::evaluation::{ExperimentConfig, PolicyClassSpec, RateSweepConfig, SweepTask};
use iswerm_core::theory::TheoryConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectConfig {
    pub env: EnvSpec,
    pub schedule: ExplorationSchedule,
    pub greedy: GreedyModelSpec,
    pub horizon: usize,
}

impl Default for CollectConfig {
    fn default() -> Self {
        CollectConfig {
            env: EnvSpec::default(),
            schedule: ExplorationSchedule::default(),
            greedy: GreedyModelSpec::default(),
            horizon: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Fresh uniform rounds for test error.
    pub n_test: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig { n_test: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabConfig {
    /// Master seed. Replaces the seeds of the sections below.
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide. `--threads` and
    /// `ISWERM_LAB_THREADS` take precedence.
    pub threads: usize,
    pub collect: CollectConfig,
    pub evaluate: EvaluateConfig,
    pub bench: ExperimentConfig,
    pub sweep: RateSweepConfig,
    pub theory: TheoryConfig,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            seed: 0,
            threads: 0,
            collect: CollectConfig::default(),
            evaluate: EvaluateConfig::default(),
            bench: ExperimentConfig {
                schedule: ExplorationSchedule::new(1.0 / 3.0, 0.0).expect("valid"),
                ..ExperimentConfig::default()
            },
            sweep: RateSweepConfig {
                env: slow_rate_env(),
                task: SweepTask::Policy {
                    class: PolicyClassSpec::Tables {
                        pinned: Vec::new(),
                        pin_optimal: vec![3],
                    },
                },
                ..RateSweepConfig::default()
            },
            theory: TheoryConfig::default(),
        }
    }
}

/// Four equiprobable contexts (the origin and three one-hot vectors), three
/// arms, every best-arm gap at least 1. Noise is heteroscedastic: large on the arms
/// that exploitation rarely pulls, so regret stays variance-driven over the
/// whole default horizon grid. The last context is easy and is pinned to its
/// best arm in the default policy class, leaving 27 tables.
pub fn slow_rate_env() -> EnvSpec {
    EnvSpec::Discrete {
        support: vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ],
        probs: vec![0.25; 4],
        mu: vec![
            vec![0.0, 1.24, 3.56],
            vec![3.2, 0.0, 2.94],
            vec![2.62, 1.86, 0.0],
            vec![1.0, 2.0, 0.0],
        ],
        noise: NoiseSpec::Table(vec![
            vec![1.0, 46.2, 17.9],
            vec![9.2, 1.0, 1.0],
            vec![4.1, 1.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ]),
    }
}

impl LabConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: LabConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.collect.schedule.validate()?;
        self.bench.validate()?;
        self.sweep.validate()?;
        if self.evaluate.n_test < 2 {
            anyhow::bail!("evaluate.n_test must be at least 2");
        }
        Ok(())
    }

    /// Copies the master seed into every section.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.bench.seed = seed;
        self.sweep.seed = seed;
        self.theory.sup.seed = seed;
    }

    /// Defaults as commented TOML.
    pub fn explain() -> String {
        let body = toml::to_string(&LabConfig::default()).expect("default config serializes");
        format!(
            "# iswerm-lab configuration with every default spelled out.\n\
             # Omitted keys take these values; unknown keys are rejected.\n\
             # `seed` overrides the per-section seeds.\n\n{body}"
        )
    }

    /// SHA-256 of the canonical JSON form (object keys sorted).
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        sha256_hex(canonical_json(&value).as_bytes())
    }
}

/// Compact JSON with object keys in sorted order at every level.
pub fn canonical_json(v: &serde_json::Value) -> String {
    use serde_json::Value;
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", Value::String(k.clone()), canonical_json(&m[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(a) => format!("[{}]", a.iter().map(canonical_json).collect::<Vec<_>>().join(",")),
        other => other.to_string(),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
