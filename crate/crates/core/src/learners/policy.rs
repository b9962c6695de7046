//! Policy learning by weighted empirical risk minimization.
//!
//! The empirical risk of a deterministic policy `h` is
//! `(1/T) sum_t w_t * s * y_t * 1{h(x_t) = a_t}` where `s` is the cost sign of
//! the environment (`-1` when outcomes are rewards). Finite classes are
//! searched exhaustively; depth-limited trees are searched exactly by dynamic
//! programming over a per-feature threshold grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Context, LoggedDataset};
use crate::error::{Error, Result};
use crate::predictor::Predictor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Policy {
    Constant { arm: usize },
    /// Exact-match lookup over listed contexts, `default` elsewhere.
    Table {
        support: Vec<Context>,
        arms: Vec<usize>,
        default: usize,
    },
    Tree { root: PolicyNode },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyNode {
    Leaf {
        arm: usize,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<PolicyNode>,
        right: Box<PolicyNode>,
    },
}

impl PolicyNode {
    pub fn action(&self, x: &[f64]) -> usize {
        match self {
            PolicyNode::Leaf { arm } => *arm,
            PolicyNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.action(x)
                } else {
                    right.action(x)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            PolicyNode::Leaf { .. } => 0,
            PolicyNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn max_arm(&self) -> usize {
        match self {
            PolicyNode::Leaf { arm } => *arm,
            PolicyNode::Split { left, right, .. } => left.max_arm().max(right.max_arm()),
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            PolicyNode::Leaf { .. } => None,
            PolicyNode::Split {
                feature, left, right, ..
            } => Some(
                (*feature)
                    .max(left.max_feature().unwrap_or(0))
                    .max(right.max_feature().unwrap_or(0)),
            ),
        }
    }
}

impl Policy {
    pub fn action(&self, x: &[f64]) -> usize {
        match self {
            Policy::Constant { arm } => *arm,
            Policy::Table {
                support,
                arms,
                default,
            } => support
                .iter()
                .position(|s| s.0.as_slice() == x)
                .map_or(*default, |i| arms[i]),
            Policy::Tree { root } => root.action(x),
        }
    }

    pub fn check(&self, num_arms: usize, dim: usize) -> Result<()> {
        let bad_arm = |a: usize| a >= num_arms;
        let ok = match self {
            Policy::Constant { arm } => !bad_arm(*arm),
            Policy::Table {
                support,
                arms,
                default,
            } => {
                support.len() == arms.len()
                    && !bad_arm(*default)
                    && !arms.iter().any(|a| bad_arm(*a))
                    && support.iter().all(|c| c.dim() == dim)
            }
            Policy::Tree { root } => {
                !bad_arm(root.max_arm()) && root.max_feature().is_none_or(|f| f < dim)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "policy incompatible with K = {num_arms}, d = {dim}"
            )))
        }
    }
}

/// A policy viewed as the function `f_h(x, a) = 1{h(x) = a}`.
impl Predictor for Policy {
    fn predict(&self, x: &[f64], arm: usize) -> f64 {
        if self.action(x) == arm {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitePolicyClass {
    pub policies: Vec<Policy>,
}

impl FinitePolicyClass {
    pub fn new(policies: Vec<Policy>) -> Result<Self> {
        if policies.is_empty() {
            return Err(Error::invalid("empty policy class"));
        }
        Ok(FinitePolicyClass { policies })
    }

    /// Reads a JSON array of policies.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => e.into(),
        })?;
        Self::new(serde_json::from_str(&text)?)
    }

    /// Every lookup table over `support`, where context `i` ranges over all
    /// arms if `fixed[i]` is `None` and is pinned otherwise. The first free
    /// context varies slowest.
    pub fn all_tables(support: &[Context], num_arms: usize, fixed: &[Option<usize>]) -> Result<Self> {
        if fixed.len() != support.len() {
            return Err(Error::invalid("one entry of `fixed` per support point required"));
        }
        let free: Vec<usize> = (0..support.len()).filter(|&i| fixed[i].is_none()).collect();
        let count = num_arms
            .checked_pow(free.len() as u32)
            .filter(|c| *c <= 1 << 24)
            .ok_or_else(|| Error::invalid("policy class too large to enumerate"))?;
        let mut out = Vec::with_capacity(count);
        for mut code in 0..count {
            let mut arms: Vec<usize> = fixed.iter().map(|f| f.unwrap_or(0)).collect();
            for &i in free.iter().rev() {
                arms[i] = code % num_arms;
                code /= num_arms;
            }
            out.push(Policy::Table {
                support: support.to_vec(),
                arms,
                default: 0,
            });
        }
        Self::new(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreePolicyClass {
    pub max_depth: usize,
    /// Candidate thresholds per feature; built from the data when `None`.
    pub thresholds: Option<Vec<Vec<f64>>>,
    pub grid_size: usize,
}

impl TreePolicyClass {
    pub const DEFAULT_GRID: usize = 16;

    pub fn new(max_depth: usize) -> Self {
        TreePolicyClass {
            max_depth,
            thresholds: None,
            grid_size: Self::DEFAULT_GRID,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyClass {
    Finite(FinitePolicyClass),
    Tree(TreePolicyClass),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFit {
    pub policy: Policy,
    /// Position in the class for finite classes.
    pub index: Option<usize>,
    /// Weighted empirical risk of the selected policy.
    pub risk: f64,
}

/// Per-feature thresholds: midpoints of consecutive distinct values when
/// there are at most `grid_size + 1` of them, otherwise `grid_size` empirical
/// quantiles (excluding the maximum, which would not split anything).
pub fn threshold_grid(contexts: &[&[f64]], dim: usize, grid_size: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|j| {
            let mut v: Vec<f64> = contexts.iter().map(|x| x[j]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            if v.len() <= grid_size + 1 {
                return v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            }
            let n = v.len();
            let mut t: Vec<f64> = (1..=grid_size).map(|k| v[k * n / (grid_size + 1)]).collect();
            t.dedup();
            let top = v[n - 1];
            t.retain(|x| *x < top);
            t
        })
        .collect()
}

fn better(cand: f64, best: f64) -> bool {
    cand < best - 1e-12 * cand.abs().max(best.abs())
}

struct TreeSearch<'a> {
    /// Signed weighted outcome per record.
    value: &'a [f64],
    action: &'a [usize],
    /// `bins[j][i]`: number of thresholds of feature `j` strictly below `x_ij`,
    /// so `x_ij <= thresholds[j][k]` iff `bins[j][i] <= k`.
    bins: Vec<Vec<usize>>,
    thresholds: &'a [Vec<f64>],
    num_arms: usize,
}

impl TreeSearch<'_> {
    fn arm_sums(&self, rows: &[usize]) -> Vec<f64> {
        let mut s = vec![0.0; self.num_arms];
        for &i in rows {
            s[self.action[i]] += self.value[i];
        }
        s
    }

    fn best_leaf(sums: &[f64]) -> (f64, usize) {
        let mut best = (sums[0], 0);
        for (a, &v) in sums.iter().enumerate().skip(1) {
            if better(v, best.0) {
                best = (v, a);
            }
        }
        best
    }

    fn solve(&self, rows: &[usize], depth: usize) -> (f64, PolicyNode) {
        let sums = self.arm_sums(rows);
        let (leaf_risk, leaf_arm) = Self::best_leaf(&sums);
        let mut best = (leaf_risk, PolicyNode::Leaf { arm: leaf_arm });
        if depth == 0 {
            return best;
        }
        if depth == 1 {
            for (j, grid) in self.thresholds.iter().enumerate() {
                let mut hist = vec![vec![0.0; self.num_arms]; grid.len() + 1];
                for &i in rows {
                    hist[self.bins[j][i]][self.action[i]] += self.value[i];
                }
                let mut left = vec![0.0; self.num_arms];
                for (k, &threshold) in grid.iter().enumerate() {
                    for a in 0..self.num_arms {
                        left[a] += hist[k][a];
                    }
                    let right: Vec<f64> = sums.iter().zip(&left).map(|(s, l)| s - l).collect();
                    let (lr, la) = Self::best_leaf(&left);
                    let (rr, ra) = Self::best_leaf(&right);
                    if better(lr + rr, best.0) {
                        best = (
                            lr + rr,
                            PolicyNode::Split {
                                feature: j,
                                threshold,
                                left: Box::new(PolicyNode::Leaf { arm: la }),
                                right: Box::new(PolicyNode::Leaf { arm: ra }),
                            },
                        );
                    }
                }
            }
            return best;
        }
        for (j, grid) in self.thresholds.iter().enumerate() {
            for (k, &threshold) in grid.iter().enumerate() {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| self.bins[j][i] <= k);
                let (lr, ln) = self.solve(&l, depth - 1);
                let (rr, rn) = self.solve(&r, depth - 1);
                if better(lr + rr, best.0) {
                    best = (
                        lr + rr,
                        PolicyNode::Split {
                            feature: j,
                            threshold,
                            left: Box::new(ln),
                            right: Box::new(rn),
                        },
                    );
                }
            }
        }
        best
    }
}

fn signed_values(ds: &LoggedDataset, weights: &[f64], sign: f64) -> Result<Vec<f64>> {
    if weights.len() != ds.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} records",
            weights.len(),
            ds.len()
        )));
    }
    if ds.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    Ok(ds
        .records
        .iter()
        .zip(weights)
        .map(|(r, w)| w * sign * r.outcome)
        .collect())
}

/// Weighted empirical risk of one policy.
pub fn policy_empirical_risk(policy: &Policy, ds: &LoggedDataset, weights: &[f64], sign: f64) -> Result<f64> {
    let v = signed_values(ds, weights, sign)?;
    let total: f64 = ds
        .records
        .iter()
        .zip(&v)
        .filter(|(r, _)| policy.action(&r.context) == r.action)
        .map(|(_, v)| v)
        .sum();
    Ok(total / ds.len() as f64)
}

/// Running empirical risks of every member of a finite class, so that risks
/// on a growing prefix of a dataset cost one pass over the data overall.
#[derive(Debug, Clone)]
pub struct FiniteRiskAccumulator<'a> {
    class: &'a FinitePolicyClass,
    sums: Vec<f64>,
    count: usize,
}

impl<'a> FiniteRiskAccumulator<'a> {
    pub fn new(class: &'a FinitePolicyClass) -> Self {
        FiniteRiskAccumulator {
            class,
            sums: vec![0.0; class.policies.len()],
            count: 0,
        }
    }

    /// Adds one record with signed weighted outcome `value`.
    pub fn push(&mut self, x: &[f64], action: usize, value: f64) {
        for (s, p) in self.sums.iter_mut().zip(&self.class.policies) {
            if p.action(x) == action {
                *s += value;
            }
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Current minimizer, ties to the earliest policy.
    pub fn best(&self) -> PolicyFit {
        let mut best = 0;
        for (i, &s) in self.sums.iter().enumerate() {
            if s < self.sums[best] {
                best = i;
            }
        }
        PolicyFit {
            policy: self.class.policies[best].clone(),
            index: Some(best),
            risk: self.sums[best] / self.count.max(1) as f64,
        }
    }
}

pub fn fit_policy_iswerm(
    ds: &LoggedDataset,
    weights: &[f64],
    class: &PolicyClass,
    sign: f64,
) -> Result<PolicyFit> {
    let values = signed_values(ds, weights, sign)?;
    match class {
        PolicyClass::Finite(c) => {
            if c.policies.is_empty() {
                return Err(Error::invalid("empty policy class"));
            }
            for p in &c.policies {
                p.check(ds.num_arms, ds.context_dim)?;
            }
            let mut acc = FiniteRiskAccumulator::new(c);
            for (r, v) in ds.records.iter().zip(&values) {
                acc.push(&r.context, r.action, *v);
            }
            Ok(acc.best())
        }
        PolicyClass::Tree(c) => {
            let contexts: Vec<&[f64]> = ds.records.iter().map(|r| r.context.0.as_slice()).collect();
            let thresholds = match &c.thresholds {
                Some(t) => {
                    if t.len() != ds.context_dim {
                        return Err(Error::invalid("one threshold list per feature required"));
                    }
                    let mut t = t.clone();
                    for g in &mut t {
                        g.sort_by(f64::total_cmp);
                        g.dedup();
                    }
                    t
                }
                None => threshold_grid(&contexts, ds.context_dim, c.grid_size),
            };
            let bins = thresholds
                .iter()
                .enumerate()
                .map(|(j, g)| {
                    contexts
                        .iter()
                        .map(|x| g.partition_point(|t| *t < x[j]))
                        .collect()
                })
                .collect();
            let action: Vec<usize> = ds.records.iter().map(|r| r.action).collect();
            let search = TreeSearch {
                value: &values,
                action: &action,
                bins,
                thresholds: &thresholds,
                num_arms: ds.num_arms,
            };
            let rows: Vec<usize> = (0..ds.len()).collect();
            let (risk, root) = search.solve(&rows, c.max_depth);
            Ok(PolicyFit {
                policy: Policy::Tree { root },
                index: None,
                risk: risk / ds.len() as f64,
            })
        }
    }
}
