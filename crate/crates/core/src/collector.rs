//! Epsilon-greedy data collection with exact logged propensities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{LoggedDataset, LoggedRecord, ReferenceWeight};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::learners::{fit_cart, NormalEquations, TreeModel};
use crate::seed::{child_rng, stage};

/// `eps_t = max(min(1, t^-beta), floor_eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplorationSchedule {
    pub beta: f64,
    pub floor_eps: f64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        ExplorationSchedule {
            beta: 1.0 / 3.0,
            floor_eps: 0.0,
        }
    }
}

impl ExplorationSchedule {
    pub fn new(beta: f64, floor_eps: f64) -> Result<Self> {
        let s = ExplorationSchedule { beta, floor_eps };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.floor_eps) {
            return Err(Error::invalid(format!(
                "floor_eps must lie in [0, 1], got {}",
                self.floor_eps
            )));
        }
        Ok(())
    }

    pub fn epsilon_at(&self, t: u64) -> f64 {
        let t = t.max(1) as f64;
        t.powf(-self.beta).min(1.0).max(self.floor_eps)
    }
}

pub fn epsilon_at(schedule: &ExplorationSchedule, t: u64) -> f64 {
    schedule.epsilon_at(t)
}

/// `eps/K` on every arm plus `1 - eps` on the greedy one.
pub fn greedy_propensities(greedy_arm: usize, epsilon: f64, num_arms: usize) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if num_arms == 0 || greedy_arm >= num_arms {
        return Err(Error::invalid(format!(
            "greedy arm {greedy_arm} out of range for K = {num_arms}"
        )));
    }
    let floor = epsilon / num_arms as f64;
    let mut p = vec![floor; num_arms];
    p[greedy_arm] = 1.0 - epsilon + floor;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyLearner {
    /// Per-arm least squares on `(1, x)`.
    Linear,
    /// Per-arm regression tree on `x`.
    Tree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefitCadence {
    EveryRound,
    /// Refit when the round index minus one is a power of two.
    Doubling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyModelSpec {
    pub learner: GreedyLearner,
    pub cadence: RefitCadence,
    pub tree_max_depth: Option<usize>,
    pub tree_min_leaf_weight: f64,
}

impl Default for GreedyModelSpec {
    fn default() -> Self {
        GreedyModelSpec {
            learner: GreedyLearner::Linear,
            cadence: RefitCadence::EveryRound,
            tree_max_depth: Some(6),
            tree_min_leaf_weight: 5.0,
        }
    }
}

impl GreedyModelSpec {
    pub fn linear() -> Self {
        Self::default()
    }

    pub fn tree() -> Self {
        GreedyModelSpec {
            learner: GreedyLearner::Tree,
            ..Self::default()
        }
    }

    fn refit_due(&self, t: u64) -> bool {
        match self.cadence {
            RefitCadence::EveryRound => true,
            RefitCadence::Doubling => (t - 1).is_power_of_two(),
        }
    }
}

/// Diagonal jitter for per-arm least squares with fewer samples than unknowns.
pub const GREEDY_JITTER: f64 = 1e-8;

enum ArmFit {
    Linear(Vec<f64>),
    Tree(TreeModel),
}

impl ArmFit {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            ArmFit::Linear(theta) => theta[0] + theta[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>(),
            ArmFit::Tree(t) => t.predict_features(x),
        }
    }
}

/// Per-arm history and the most recent fit of each arm.
struct GreedyState {
    spec: GreedyModelSpec,
    linear: Vec<NormalEquations>,
    xs: Vec<Vec<Vec<f64>>>,
    ys: Vec<Vec<f64>>,
    fits: Vec<ArmFit>,
    /// Arms with data newer than their fit.
    stale: Vec<bool>,
    phi: Vec<f64>,
}

impl GreedyState {
    fn new(spec: GreedyModelSpec, k: usize, d: usize) -> Self {
        GreedyState {
            spec,
            linear: (0..k).map(|_| NormalEquations::new(d + 1)).collect(),
            xs: vec![Vec::new(); k],
            ys: vec![Vec::new(); k],
            fits: (0..k).map(|_| ArmFit::Linear(vec![0.0; d + 1])).collect(),
            stale: vec![false; k],
            phi: vec![1.0; d + 1],
        }
    }

    fn observe(&mut self, x: &[f64], arm: usize, y: f64) {
        match self.spec.learner {
            GreedyLearner::Linear => {
                self.phi[1..].copy_from_slice(x);
                self.linear[arm].add(&self.phi, y, 1.0);
            }
            GreedyLearner::Tree => {
                self.xs[arm].push(x.to_vec());
                self.ys[arm].push(y);
            }
        }
        self.stale[arm] = true;
    }

    /// Refits every arm whose data changed. Arms whose data did not change
    /// keep their fit, which is what a full refit would produce anyway.
    fn refit(&mut self) -> Result<()> {
        for a in 0..self.fits.len() {
            if !self.stale[a] {
                continue;
            }
            self.fits[a] = match self.spec.learner {
                GreedyLearner::Linear => ArmFit::Linear(self.linear[a].solve_jittered(GREEDY_JITTER)),
                GreedyLearner::Tree => {
                    let w = vec![1.0; self.ys[a].len()];
                    ArmFit::Tree(fit_cart(
                        &self.xs[a],
                        &self.ys[a],
                        &w,
                        self.spec.tree_max_depth,
                        self.spec.tree_min_leaf_weight,
                    )?)
                }
            };
            self.stale[a] = false;
        }
        Ok(())
    }

    /// Arm with the smallest predicted cost; ties to the lowest index.
    fn greedy_arm(&self, x: &[f64], cost_sign: f64) -> usize {
        let mut best = 0;
        let mut best_v = cost_sign * self.fits[0].predict(x);
        for (a, f) in self.fits.iter().enumerate().skip(1) {
            let v = cost_sign * f.predict(x);
            if v < best_v {
                best = a;
                best_v = v;
            }
        }
        best
    }
}

/// Runs the epsilon-greedy loop for `horizon` rounds.
///
/// Arms are pulled uniformly at random (logged as `g = 1/K`, `eps = 1`)
/// until each has been seen once. Afterwards the greedy model fitted on all
/// earlier rounds picks the exploit arm. The loop consumes a single RNG
/// stream causally, so the first `T` records do not depend on `horizon`.
pub fn collect(
    env: &Environment,
    schedule: &ExplorationSchedule,
    greedy: &GreedyModelSpec,
    horizon: usize,
    seed: u64,
) -> Result<LoggedDataset> {
    schedule.validate()?;
    let k = env.num_arms();
    let d = env.context_dim();
    if k < 2 || d < 1 {
        return Err(Error::Degenerate(format!("environment with K = {k}, d = {d}")));
    }
    if horizon < k {
        return Err(Error::invalid(format!("horizon {horizon} shorter than K = {k}")));
    }
    let sign = env.cost_sign();
    let mut rng = child_rng(seed, 0, stage::COLLECT);
    let mut state = GreedyState::new(*greedy, k, d);
    let mut pulled = vec![false; k];
    let mut warm = true;
    let uniform = 1.0 / k as f64;
    let mut records = Vec::with_capacity(horizon);

    for t in 1..=horizon as u64 {
        let draw = env.sample(&mut rng);
        let (action, propensity, epsilon) = if warm {
            (rng.random_range(0..k), uniform, 1.0)
        } else {
            if greedy.refit_due(t) {
                state.refit()?;
            }
            let eps = schedule.epsilon_at(t);
            let g = state.greedy_arm(&draw.context, sign);
            let a = if rng.random::<f64>() < eps {
                rng.random_range(0..k)
            } else {
                g
            };
            let floor = eps / k as f64;
            let p = if a == g { 1.0 - eps + floor } else { floor };
            (a, p, eps)
        };
        let outcome = env.outcome(&draw, action, &mut rng);
        state.observe(&draw.context, action, outcome);
        if warm {
            pulled[action] = true;
            if pulled.iter().all(|p| *p) {
                warm = false;
                state.refit()?;
            }
        }
        records.push(LoggedRecord {
            t,
            context: draw.context,
            action,
            outcome,
            propensity,
            epsilon,
        });
    }
    if warm {
        return Err(Error::Degenerate(format!(
            "uniform warm start did not reach every arm within {horizon} rounds"
        )));
    }
    LoggedDataset::new(k, d, schedule.beta, seed, records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationBound {
    /// `gamma[t - 1] = sup_a g*(a|.) / (eps_t / K)`.
    pub gamma: Vec<f64>,
    pub gamma_avg: f64,
    pub gamma_max: f64,
}

pub fn exploration_bound(
    schedule: &ExplorationSchedule,
    num_arms: usize,
    horizon: usize,
    gstar: &ReferenceWeight,
) -> ExplorationBound {
    let k = num_arms as f64;
    let sup = gstar.sup(num_arms);
    let gamma: Vec<f64> = (1..=horizon as u64)
        .map(|t| sup * k / schedule.epsilon_at(t))
        .collect();
    let gamma_avg = if gamma.is_empty() {
        0.0
    } else {
        gamma.iter().sum::<f64>() / gamma.len() as f64
    };
    let gamma_max = gamma.iter().copied().fold(0.0, f64::max);
    ExplorationBound {
        gamma,
        gamma_avg,
        gamma_max,
    }
}
