//! Weighted CART regression trees.
//!
//! Greedy binary splitting on axis-aligned thresholds (midpoints between
//! consecutive distinct values), choosing at each node the split with the
//! largest weighted SSE reduction. Zero-weight rows are discarded before
//! fitting so they cannot influence candidate thresholds.

use serde::{Deserialize, Serialize};

use super::wls::check_design;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
        weight: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    /// Preorder; node 0 is the root.
    pub nodes: Vec<TreeNode>,
    pub num_features: usize,
    pub max_depth: Option<usize>,
    pub min_leaf_weight: f64,
}

impl TreeModel {
    pub fn predict_features(&self, phi: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if phi[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    /// Structural equality up to leaf values and weights: same splits in the
    /// same places.
    pub fn same_structure(&self, other: &TreeModel) -> bool {
        self.nodes.len() == other.nodes.len()
            && self.nodes.iter().zip(&other.nodes).all(|(a, b)| match (a, b) {
                (TreeNode::Leaf { .. }, TreeNode::Leaf { .. }) => true,
                (
                    TreeNode::Split {
                        feature: f1,
                        threshold: t1,
                        left: l1,
                        right: r1,
                    },
                    TreeNode::Split {
                        feature: f2,
                        threshold: t2,
                        left: l2,
                        right: r2,
                    },
                ) => f1 == f2 && t1 == t2 && l1 == l2 && r1 == r2,
                _ => false,
            })
    }
}

/// Relative size below which an SSE reduction is treated as zero.
const GAIN_TOL: f64 = 1e-12;
const TIE_TOL: f64 = 1e-11;

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    w: &'a [f64],
    max_depth: Option<usize>,
    min_leaf_weight: f64,
    nodes: Vec<TreeNode>,
    in_left: Vec<bool>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn build(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let rows = &sorted[0];
        let (mut wsum, mut s, mut s2) = (0.0, 0.0, 0.0);
        for &i in rows {
            wsum += self.w[i];
            s += self.w[i] * self.y[i];
            s2 += self.w[i] * self.y[i] * self.y[i];
        }
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            value: s / wsum,
            weight: wsum,
        });

        let depth_ok = self.max_depth.is_none_or(|m| depth < m);
        if !depth_ok || rows.len() < 2 || wsum < 2.0 * self.min_leaf_weight {
            return id;
        }
        let Some(best) = self.best_split(&sorted, wsum, s, s2) else {
            return id;
        };
        if !(best.gain > GAIN_TOL * s2) {
            return id;
        }

        for &i in rows {
            self.in_left[i] = self.x[i][best.feature] <= best.threshold;
        }
        let mut left = Vec::with_capacity(sorted.len());
        let mut right = Vec::with_capacity(sorted.len());
        for list in &sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = list.iter().partition(|&&i| self.in_left[i]);
            left.push(l);
            right.push(r);
        }
        drop(sorted);
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        id
    }

    fn best_split(&self, sorted: &[Vec<usize>], wsum: f64, s: f64, s2: f64) -> Option<BestSplit> {
        let base = s * s / wsum;
        // Gains this close count as tied and the earlier candidate stays.
        let tie = TIE_TOL * s2;
        let mut best: Option<BestSplit> = None;
        for (j, list) in sorted.iter().enumerate() {
            let (mut wl, mut sl) = (0.0, 0.0);
            for k in 0..list.len() - 1 {
                let i = list[k];
                wl += self.w[i];
                sl += self.w[i] * self.y[i];
                let (lo, hi) = (self.x[i][j], self.x[list[k + 1]][j]);
                if !(lo < hi) {
                    continue;
                }
                let wr = wsum - wl;
                if wl < self.min_leaf_weight || wr < self.min_leaf_weight || wl <= 0.0 || wr <= 0.0 {
                    continue;
                }
                let sr = s - sl;
                let gain = sl * sl / wl + sr * sr / wr - base;
                if best.as_ref().is_none_or(|b| gain > b.gain + tie) {
                    let mut threshold = 0.5 * (lo + hi);
                    if !(threshold < hi) {
                        threshold = lo;
                    }
                    best = Some(BestSplit {
                        feature: j,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Fits a weighted regression tree. `max_depth = None` grows until nodes are
/// pure or cannot be split.
pub fn fit_cart(
    features: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
    max_depth: Option<usize>,
    min_leaf_weight: f64,
) -> Result<TreeModel> {
    let p = check_design(features, y, w)?;
    // Work in units of the largest weight so that a common rescaling of the
    // weights cannot change split choices through rounding.
    let scale = w.iter().copied().fold(0.0, f64::max);
    let w: Vec<f64> = w.iter().map(|v| v / scale).collect();
    let keep: Vec<usize> = (0..features.len()).filter(|&i| w[i] > 0.0).collect();
    let sorted: Vec<Vec<usize>> = (0..p)
        .map(|j| {
            let mut idx = keep.clone();
            idx.sort_by(|&a, &b| features[a][j].total_cmp(&features[b][j]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let mut b = Builder {
        x: features,
        y,
        w: &w,
        max_depth,
        min_leaf_weight: min_leaf_weight.max(0.0) / scale,
        nodes: Vec::new(),
        in_left: vec![false; features.len()],
    };
    b.build(sorted, 0);
    let mut nodes = b.nodes;
    for n in &mut nodes {
        if let TreeNode::Leaf { weight, .. } = n {
            *weight *= scale;
        }
    }
    Ok(TreeModel {
        nodes,
        num_features: p,
        max_depth,
        min_leaf_weight,
    })
}

/// Weighted training SSE of a fitted tree.
pub fn tree_sse(tree: &TreeModel, features: &[Vec<f64>], y: &[f64], w: &[f64]) -> f64 {
    features
        .iter()
        .zip(y)
        .zip(w)
        .map(|((phi, yi), wi)| wi * (yi - tree.predict_features(phi)).powi(2))
        .sum()
}
