//! Declarative environment descriptions, from config files or the compact
//! command-line form `kind:key=value,...`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    make_classification_env, make_discrete, make_synthetic_linear, make_synthetic_quadratic,
    make_synthetic_step, Environment,
};
use crate::dataset::Context;
use crate::error::{Error, Result};
use crate::ingest::{load_csv_classification, IngestOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Scalar(f64),
    /// One standard deviation per (context, arm) cell.
    Table(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Linear {
        d: usize,
        k: usize,
        seed: u64,
        noise: f64,
    },
    Quadratic {
        d: usize,
        k: usize,
        seed: u64,
        noise: f64,
        curvature: f64,
    },
    Step {
        d: usize,
        k: usize,
        seed: u64,
        noise: f64,
    },
    Discrete {
        support: Vec<Vec<f64>>,
        probs: Vec<f64>,
        mu: Vec<Vec<f64>>,
        noise: NoiseSpec,
    },
    /// Bandit view of a labelled CSV file.
    Csv {
        path: PathBuf,
        label: String,
        #[serde(default = "yes")]
        standardize: bool,
        #[serde(default = "yes")]
        drop_missing: bool,
    },
}

fn yes() -> bool {
    true
}

impl Default for EnvSpec {
    fn default() -> Self {
        EnvSpec::Linear {
            d: 2,
            k: 3,
            seed: 0,
            noise: 1.0,
        }
    }
}

impl EnvSpec {
    pub fn build(&self) -> Result<Environment> {
        match self {
            EnvSpec::Linear { d, k, seed, noise } => {
                Ok(Environment::Linear(make_synthetic_linear(*d, *k, *seed, *noise)?))
            }
            EnvSpec::Quadratic {
                d,
                k,
                seed,
                noise,
                curvature,
            } => Ok(Environment::Quadratic(make_synthetic_quadratic(
                *d, *k, *seed, *noise, *curvature,
            )?)),
            EnvSpec::Step { d, k, seed, noise } => {
                Ok(Environment::Step(make_synthetic_step(*d, *k, *seed, *noise)?))
            }
            EnvSpec::Discrete {
                support,
                probs,
                mu,
                noise,
            } => {
                let noise = match noise {
                    NoiseSpec::Scalar(s) => mu.iter().map(|row| vec![*s; row.len()]).collect(),
                    NoiseSpec::Table(t) => t.clone(),
                };
                let support = support.iter().cloned().map(Context).collect();
                Ok(Environment::Discrete(make_discrete(
                    support,
                    probs.clone(),
                    mu.clone(),
                    noise,
                )?))
            }
            EnvSpec::Csv {
                path,
                label,
                standardize,
                drop_missing,
            } => {
                let table = load_csv_classification(
                    path,
                    label,
                    IngestOptions {
                        drop_missing: *drop_missing,
                        standardize: *standardize,
                    },
                )?;
                Ok(Environment::Classification(make_classification_env(table)?))
            }
        }
    }

    /// Files this spec reads, for run manifests.
    pub fn input_files(&self) -> Vec<&Path> {
        match self {
            EnvSpec::Csv { path, .. } => vec![path.as_path()],
            _ => Vec::new(),
        }
    }
}

fn parse_kv(body: &str) -> Result<Vec<(String, String)>> {
    if body.trim().is_empty() {
        return Ok(Vec::new());
    }
    body.split(',')
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got '{kv}'")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value '{v}' for '{key}'")))
}

/// `linear:d=2,k=3,seed=0,noise=1`, `quadratic:...,curvature=1`, `step:...`,
/// `discrete:file=env.toml` (or `.json`), `csv:path=data.csv,label=class`.
impl FromStr for EnvSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, body) = s.split_once(':').unwrap_or((s, ""));
        let kv = parse_kv(body)?;
        let allowed: &[&str] = match kind {
            "linear" | "step" => &["d", "k", "seed", "noise"],
            "quadratic" => &["d", "k", "seed", "noise", "curvature"],
            "discrete" => &["file"],
            "csv" => &["path", "label", "standardize", "drop_missing"],
            other => {
                return Err(Error::Config(format!(
                    "unknown environment kind '{other}' (expected linear, quadratic, step, discrete or csv)"
                )))
            }
        };
        if let Some((k, _)) = kv.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key '{k}' for {kind} environment")));
        }
        let get = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let (d, k, seed, noise) = (
            get("d").map_or(Ok(2), |v| num("d", v))?,
            get("k").map_or(Ok(3), |v| num("k", v))?,
            get("seed").map_or(Ok(0), |v| num("seed", v))?,
            get("noise").map_or(Ok(1.0), |v| num("noise", v))?,
        );
        match kind {
            "linear" => Ok(EnvSpec::Linear { d, k, seed, noise }),
            "step" => Ok(EnvSpec::Step { d, k, seed, noise }),
            "quadratic" => Ok(EnvSpec::Quadratic {
                d,
                k,
                seed,
                noise,
                curvature: get("curvature").map_or(Ok(1.0), |v| num("curvature", v))?,
            }),
            "discrete" => {
                let file = get("file").ok_or_else(|| Error::Config("discrete environment needs file=<path>".into()))?;
                load_env_file(Path::new(file))
            }
            _ => Ok(EnvSpec::Csv {
                path: get("path")
                    .ok_or_else(|| Error::Config("csv environment needs path=<file>".into()))?
                    .into(),
                label: get("label")
                    .ok_or_else(|| Error::Config("csv environment needs label=<column>".into()))?
                    .to_string(),
                standardize: get("standardize").map_or(Ok(true), |v| num("standardize", v))?,
                drop_missing: get("drop_missing").map_or(Ok(true), |v| num("drop_missing", v))?,
            }),
        }
    }
}

/// Reads a full environment spec from a TOML or JSON file. A file without a
/// `kind` key is taken to describe a discrete environment.
pub fn load_env_file(path: &Path) -> Result<EnvSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => e.into(),
    })?;
    let mut value: serde_json::Value = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        let t: toml::Value = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        serde_json::to_value(t)?
    };
    if let Some(obj) = value.as_object_mut() {
        obj.entry("kind").or_insert_with(|| "discrete".into());
    }
    serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
