//! Logged contextual-bandit data.
//!
//! A [`LoggedDataset`] holds the rounds `(x_t, a_t, y_t)` produced by an
//! adaptive logging policy together with the probability `g_t(a_t | x_t)` the
//! policy assigned to the action it actually took and the exploration rate
//! `eps_t` in force at that round.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real-valued context vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Context(pub Vec<f64>);

impl Context {
    pub fn new(values: Vec<f64>) -> Self {
        Context(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for Context {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Context {
    fn from(v: Vec<f64>) -> Self {
        Context(v)
    }
}

/// One logged round. Serialized with the short keys of the JSONL format, in
/// the fixed order `t, x, a, y, g, eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedRecord {
    pub t: u64,
    #[serde(rename = "x")]
    pub context: Context,
    #[serde(rename = "a")]
    pub action: usize,
    #[serde(rename = "y")]
    pub outcome: f64,
    #[serde(rename = "g")]
    pub propensity: f64,
    #[serde(rename = "eps")]
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    #[serde(rename = "K")]
    pub num_arms: usize,
    #[serde(rename = "d")]
    pub context_dim: usize,
    pub beta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoggedDataset {
    pub num_arms: usize,
    pub context_dim: usize,
    /// Exploration decay exponent used at collection time.
    pub beta: f64,
    /// Master seed of the collection run.
    pub seed: u64,
    pub records: Vec<LoggedRecord>,
}

/// The reference weight function `g*` that defines the target risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceWeight {
    /// `g*(a|x) = 1`: total counterfactual error, or policy value.
    #[default]
    ConstantOne,
    /// `g*(a|x) = 1/K`.
    UniformDensity,
    /// `g*(a|x) = 1{a = a*}`.
    Dirac(usize),
}

impl ReferenceWeight {
    pub fn value(&self, action: usize, num_arms: usize) -> f64 {
        match *self {
            ReferenceWeight::ConstantOne => 1.0,
            ReferenceWeight::UniformDensity => 1.0 / num_arms as f64,
            ReferenceWeight::Dirac(star) => {
                if action == star {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `sup_a g*(a|x)`.
    pub fn sup(&self, num_arms: usize) -> f64 {
        match self {
            ReferenceWeight::UniformDensity => 1.0 / num_arms as f64,
            _ => 1.0,
        }
    }

    pub fn check(&self, num_arms: usize) -> Result<()> {
        if let ReferenceWeight::Dirac(star) = *self {
            if star >= num_arms {
                return Err(Error::invalid(format!(
                    "Dirac reference arm {star} outside [0, {num_arms})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    NonFiniteContext,
    WrongContextDim { expected: usize, found: usize },
    ArmOutOfRange { arm: usize, num_arms: usize },
    NonFiniteOutcome,
    PropensityRange,
    EpsilonRange,
    BelowExplorationFloor,
    NonConsecutiveRound { expected: u64, found: u64 },
    ArmNeverPulled(usize),
    TooFewArms,
    ZeroContextDim,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::NonFiniteContext => write!(f, "context has non-finite entry"),
            ViolationKind::WrongContextDim { expected, found } => {
                write!(f, "context dimension {found} != {expected}")
            }
            ViolationKind::ArmOutOfRange { arm, num_arms } => {
                write!(f, "arm {arm} ∉ [0,{num_arms})")
            }
            ViolationKind::NonFiniteOutcome => write!(f, "outcome not finite"),
            ViolationKind::PropensityRange => write!(f, "propensity ∉ (0,1]"),
            ViolationKind::EpsilonRange => write!(f, "epsilon ∉ (0,1]"),
            ViolationKind::BelowExplorationFloor => write!(f, "propensity < epsilon/K"),
            ViolationKind::NonConsecutiveRound { expected, found } => {
                write!(f, "non-consecutive round index (expected {expected}, found {found})")
            }
            ViolationKind::ArmNeverPulled(a) => write!(f, "arm {a} never pulled"),
            ViolationKind::TooFewArms => write!(f, "K < 2"),
            ViolationKind::ZeroContextDim => write!(f, "d < 1"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Record index, or `None` for dataset-level violations.
    pub index: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "record {i}: {}", self.kind),
            None => write!(f, "dataset: {}", self.kind),
        }
    }
}

/// Propensity checks tolerate this much rounding below the `eps/K` floor.
const FLOOR_SLACK: f64 = 1e-12;

/// Returns every invariant violation; empty iff the dataset is valid.
pub fn validate_dataset(ds: &LoggedDataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |index: Option<usize>, kind| out.push(Violation { index, kind });

    if ds.num_arms < 2 {
        push(None, ViolationKind::TooFewArms);
    }
    if ds.context_dim < 1 {
        push(None, ViolationKind::ZeroContextDim);
    }

    let k = ds.num_arms;
    let mut pulled = vec![false; k];
    for (i, r) in ds.records.iter().enumerate() {
        let expected = i as u64 + 1;
        if r.t != expected {
            push(
                Some(i),
                ViolationKind::NonConsecutiveRound {
                    expected,
                    found: r.t,
                },
            );
        }
        if r.context.dim() != ds.context_dim {
            push(
                Some(i),
                ViolationKind::WrongContextDim {
                    expected: ds.context_dim,
                    found: r.context.dim(),
                },
            );
        }
        if !r.context.is_finite() {
            push(Some(i), ViolationKind::NonFiniteContext);
        }
        if r.action >= k {
            push(
                Some(i),
                ViolationKind::ArmOutOfRange {
                    arm: r.action,
                    num_arms: k,
                },
            );
        } else {
            pulled[r.action] = true;
        }
        if !r.outcome.is_finite() {
            push(Some(i), ViolationKind::NonFiniteOutcome);
        }
        let g_ok = r.propensity > 0.0 && r.propensity <= 1.0;
        if !g_ok {
            push(Some(i), ViolationKind::PropensityRange);
        }
        let eps_ok = r.epsilon > 0.0 && r.epsilon <= 1.0;
        if !eps_ok {
            push(Some(i), ViolationKind::EpsilonRange);
        }
        if g_ok && eps_ok && k > 0 && r.propensity < r.epsilon / k as f64 - FLOOR_SLACK {
            push(Some(i), ViolationKind::BelowExplorationFloor);
        }
    }
    if !ds.records.is_empty() {
        for (a, seen) in pulled.iter().enumerate() {
            if !seen {
                push(None, ViolationKind::ArmNeverPulled(a));
            }
        }
    }
    out
}

impl LoggedDataset {
    /// Builds a dataset, rejecting it if any invariant fails.
    pub fn new(
        num_arms: usize,
        context_dim: usize,
        beta: f64,
        seed: u64,
        records: Vec<LoggedRecord>,
    ) -> Result<Self> {
        let ds = LoggedDataset {
            num_arms,
            context_dim,
            beta,
            seed,
            records,
        };
        ds.ensure_valid()?;
        Ok(ds)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = validate_dataset(self);
        if v.is_empty() {
            return Ok(());
        }
        let shown: Vec<String> = v.iter().take(5).map(|x| x.to_string()).collect();
        Err(Error::InvalidDataset(format!(
            "{} violation(s): {}",
            v.len(),
            shown.join("; ")
        )))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn header(&self) -> DatasetHeader {
        DatasetHeader {
            num_arms: self.num_arms,
            context_dim: self.context_dim,
            beta: self.beta,
            seed: self.seed,
        }
    }

    /// The first `t` rounds as a dataset of their own.
    pub fn prefix(&self, t: usize) -> LoggedDataset {
        LoggedDataset {
            num_arms: self.num_arms,
            context_dim: self.context_dim,
            beta: self.beta,
            seed: self.seed,
            records: self.records[..t.min(self.records.len())].to_vec(),
        }
    }

    /// JSON Lines: header line, then one record per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header())?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let header: DatasetHeader = loop {
            match lines.next() {
                Some((i, line)) => {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    break serde_json::from_str(&line).map_err(|e| Error::Parse {
                        line: i + 1,
                        message: e.to_string(),
                    })?;
                }
                None => {
                    return Err(Error::Parse {
                        line: 1,
                        message: "missing header line".into(),
                    })
                }
            }
        };
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: LoggedRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        Ok(LoggedDataset {
            num_arms: header.num_arms,
            context_dim: header.context_dim,
            beta: header.beta,
            seed: header.seed,
            records,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(f))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let f = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }
}
