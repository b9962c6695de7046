//! Stochastic contextual-bandit environments.
//!
//! Outcomes are costs unless [`Environment::rewards`] says otherwise; the
//! classification environment returns rewards `N(1{a = label}, 1)` and every
//! consumer that minimizes negates them.

mod classification;
mod discrete;
mod spec;
mod synthetic;

use rand::Rng;
use rand_distr::StandardNormal;

pub use classification::{make_classification_env, ClassificationEnv};
pub use discrete::{exact_reference_risk, make_discrete, DiscreteEnv, LossKind};
pub use spec::{load_env_file, EnvSpec, NoiseSpec};
pub use synthetic::{
    make_synthetic_linear, make_synthetic_quadratic, make_synthetic_step, LinearEnv,
    QuadraticEnv, StepEnv,
};

use crate::dataset::Context;

/// A sampled round: the context and the latent index (support point or
/// table row) that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub context: Context,
    pub latent: usize,
}

#[derive(Debug, Clone)]
pub enum Environment {
    Linear(LinearEnv),
    Quadratic(QuadraticEnv),
    Step(StepEnv),
    Discrete(DiscreteEnv),
    Classification(ClassificationEnv),
}

impl Environment {
    pub fn context_dim(&self) -> usize {
        match self {
            Environment::Linear(e) => e.dim,
            Environment::Quadratic(e) => e.dim,
            Environment::Step(e) => e.dim,
            Environment::Discrete(e) => e.dim(),
            Environment::Classification(e) => e.table.dim(),
        }
    }

    pub fn num_arms(&self) -> usize {
        match self {
            Environment::Linear(e) => e.num_arms,
            Environment::Quadratic(e) => e.num_arms,
            Environment::Step(e) => e.num_arms,
            Environment::Discrete(e) => e.num_arms(),
            Environment::Classification(e) => e.table.num_classes,
        }
    }

    /// Whether outcomes are rewards (to maximize) rather than costs.
    pub fn rewards(&self) -> bool {
        matches!(self, Environment::Classification(_))
    }

    /// +1 for cost environments, -1 for reward environments.
    pub fn cost_sign(&self) -> f64 {
        if self.rewards() {
            -1.0
        } else {
            1.0
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Draw {
        match self {
            Environment::Linear(e) => synthetic::uniform_box(e.dim, rng),
            Environment::Quadratic(e) => synthetic::uniform_box(e.dim, rng),
            Environment::Step(e) => synthetic::uniform_box(e.dim, rng),
            Environment::Discrete(e) => e.sample(rng),
            Environment::Classification(e) => e.sample(rng),
        }
    }

    /// Mean outcome of `arm` for the round `draw`. Always available, because
    /// the latent index pins down the classification label.
    pub fn mean_at(&self, draw: &Draw, arm: usize) -> f64 {
        match self {
            Environment::Linear(e) => e.mean(&draw.context, arm),
            Environment::Quadratic(e) => e.mean(&draw.context, arm),
            Environment::Step(e) => e.mean(&draw.context, arm),
            Environment::Discrete(e) => e.mu[draw.latent][arm],
            Environment::Classification(e) => e.mean_for_row(draw.latent, arm),
        }
    }

    pub fn noise_std_at(&self, draw: &Draw, arm: usize) -> f64 {
        match self {
            Environment::Linear(e) => e.noise_std,
            Environment::Quadratic(e) => e.noise_std,
            Environment::Step(e) => e.noise_std,
            Environment::Discrete(e) => e.noise_std[draw.latent][arm],
            Environment::Classification(_) => 1.0,
        }
    }

    pub fn outcome<R: Rng + ?Sized>(&self, draw: &Draw, arm: usize, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mean_at(draw, arm) + self.noise_std_at(draw, arm) * z
    }

    /// `mu(x, a)` as a function of the context alone, when it is known.
    pub fn mean_outcome(&self, x: &[f64], arm: usize) -> Option<f64> {
        match self {
            Environment::Linear(e) => Some(e.mean(x, arm)),
            Environment::Quadratic(e) => Some(e.mean(x, arm)),
            Environment::Step(e) => Some(e.mean(x, arm)),
            Environment::Discrete(e) => e.index_of(x).map(|i| e.mu[i][arm]),
            Environment::Classification(_) => None,
        }
    }

    /// Declared bound `M` with `|mu| <= M`.
    pub fn outcome_bound(&self) -> f64 {
        match self {
            Environment::Linear(e) => e.bound,
            Environment::Quadratic(e) => e.bound,
            Environment::Step(e) => e.bound,
            Environment::Discrete(e) => e.mean_bound(),
            Environment::Classification(_) => 1.0,
        }
    }

    pub fn as_discrete(&self) -> Option<&DiscreteEnv> {
        match self {
            Environment::Discrete(e) => Some(e),
            _ => None,
        }
    }
}
