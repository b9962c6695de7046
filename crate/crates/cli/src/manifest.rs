//! Run manifests: enough to re-execute a run and check its outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use serde::{Deserialize, Serialize};

use crate::commands::Command;
use crate::config::{sha256_hex, LabConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the output directory for artifacts, absolute for inputs.
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: &Path, recorded_as: PathBuf) -> Result<Self> {
        let data = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
        Ok(FileDigest {
            path: recorded_as,
            sha256: sha256_hex(&data),
            bytes: data.len() as u64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub bench: u64,
    pub sweep: u64,
    pub theory: u64,
}

impl Seeds {
    pub fn of(cfg: &LabConfig) -> Self {
        Seeds {
            master: cfg.seed,
            bench: cfg.bench.seed,
            sweep: cfg.sweep.seed,
            theory: cfg.theory.sup.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: Command,
    /// Configuration after `--seed` and command-line overrides.
    pub config: LabConfig,
    pub config_hash: String,
    pub seeds: Seeds,
    pub threads: usize,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
    /// Wall-clock seconds per stage.
    pub stage_seconds: BTreeMap<String, f64>,
    /// False when a theory check failed.
    pub passed: bool,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let m: RunManifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if m.config.hash() != m.config_hash {
            anyhow::bail!("manifest {}: config does not match its hash", path.display());
        }
        Ok(m)
    }

    pub fn save(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
