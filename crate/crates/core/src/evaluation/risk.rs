//! Reference risk by Monte Carlo and excess risk against the truth.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::stats::{mean, standard_error};
use crate::dataset::{Context, ReferenceWeight};
use crate::env::{exact_reference_risk, Environment, LossKind};
use crate::error::{Error, Result};
use crate::predictor::Predictor;
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub value: f64,
    /// `None` for exact values.
    pub se: Option<f64>,
}

impl RiskEstimate {
    pub fn exact(value: f64) -> Self {
        RiskEstimate { value, se: None }
    }

    fn from_samples(xs: &[f64]) -> Self {
        RiskEstimate {
            value: mean(xs),
            se: standard_error(xs),
        }
    }
}

/// Fresh rounds played with uniformly random arms. Reusing one set across
/// competing models pairs their test errors.
#[derive(Debug, Clone)]
pub struct TestSet {
    pub num_arms: usize,
    pub contexts: Vec<Context>,
    pub arms: Vec<usize>,
    pub outcomes: Vec<f64>,
    /// `mu(x, a)` at each test round.
    pub means: Vec<f64>,
}

impl TestSet {
    pub fn draw(env: &Environment, n: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let k = env.num_arms();
        let mut t = TestSet {
            num_arms: k,
            contexts: Vec::with_capacity(n),
            arms: Vec::with_capacity(n),
            outcomes: Vec::with_capacity(n),
            means: Vec::with_capacity(n),
        };
        for _ in 0..n {
            let draw = env.sample(&mut rng);
            let a = rng.random_range(0..k);
            t.outcomes.push(env.outcome(&draw, a, &mut rng));
            t.means.push(env.mean_at(&draw, a));
            t.arms.push(a);
            t.contexts.push(draw.context);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    /// Mean of `(y - f(x, a))^2`.
    pub fn mse<P: Predictor + ?Sized>(&self, f: &P) -> RiskEstimate {
        let sq: Vec<f64> = (0..self.len())
            .map(|i| (self.outcomes[i] - f.predict(&self.contexts[i], self.arms[i])).powi(2))
            .collect();
        RiskEstimate::from_samples(&sq)
    }

    /// Mean of `K * y * f(x, a)`: the value of `f` under `g* = 1`, reweighted
    /// from the uniform test arms.
    pub fn policy_value<P: Predictor + ?Sized>(&self, f: &P) -> RiskEstimate {
        let k = self.num_arms as f64;
        let v: Vec<f64> = (0..self.len())
            .map(|i| k * self.outcomes[i] * f.predict(&self.contexts[i], self.arms[i]))
            .collect();
        RiskEstimate::from_samples(&v)
    }
}

pub fn reference_risk_mc<P: Predictor + ?Sized>(
    f: &P,
    env: &Environment,
    loss: LossKind,
    n_test: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    if n_test < 2 {
        return Err(Error::invalid("n_test must be at least 2"));
    }
    let test = TestSet::draw(env, n_test, seed);
    Ok(match loss {
        LossKind::Squared => test.mse(f),
        LossKind::PolicyValue => test.policy_value(f),
    })
}

/// Per-context excess of `f` over the best function at that context.
fn pointwise_excess<P: Predictor + ?Sized>(
    f: &P,
    x: &[f64],
    mu: impl Fn(usize) -> f64,
    k: usize,
    gstar: &ReferenceWeight,
    loss: LossKind,
) -> f64 {
    match loss {
        LossKind::Squared => (0..k)
            .map(|a| gstar.value(a, k) * (mu(a) - f.predict(x, a)).powi(2))
            .sum(),
        LossKind::PolicyValue => {
            let value: f64 = (0..k).map(|a| gstar.value(a, k) * mu(a) * f.predict(x, a)).sum();
            let best = (0..k)
                .map(|a| gstar.value(a, k) * mu(a))
                .fold(f64::INFINITY, f64::min);
            value - best
        }
    }
}

/// Draws used when excess risk has to be estimated by Monte Carlo.
pub const EXCESS_MC_DRAWS: usize = 20_000;

/// `R*(f) - inf_g R*(g)` over all functions (squared loss) or all policies
/// (policy value). Exact on discrete environments; Monte Carlo over
/// contexts, with its standard error, on other known-mean environments.
pub fn excess_risk<P: Predictor + ?Sized>(
    f: &P,
    env: &Environment,
    gstar: &ReferenceWeight,
    loss: LossKind,
) -> Result<RiskEstimate> {
    excess_risk_mc(f, env, gstar, loss, EXCESS_MC_DRAWS, 0)
}

pub fn excess_risk_mc<P: Predictor + ?Sized>(
    f: &P,
    env: &Environment,
    gstar: &ReferenceWeight,
    loss: LossKind,
    n_draws: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    let k = env.num_arms();
    gstar.check(k)?;
    match env {
        Environment::Discrete(d) => {
            let total = d
                .support
                .iter()
                .enumerate()
                .map(|(i, x)| d.probs[i] * pointwise_excess(f, x, |a| d.mu[i][a], k, gstar, loss))
                .sum();
            Ok(RiskEstimate::exact(total))
        }
        Environment::Classification(_) => Err(Error::UnknownMean),
        _ => {
            if n_draws < 2 {
                return Err(Error::invalid("need at least 2 Monte Carlo draws"));
            }
            let mut rng = rng_from_seed(seed);
            let v: Vec<f64> = (0..n_draws)
                .map(|_| {
                    let draw = env.sample(&mut rng);
                    pointwise_excess(f, &draw.context, |a| env.mean_at(&draw, a), k, gstar, loss)
                })
                .collect();
            Ok(RiskEstimate::from_samples(&v))
        }
    }
}

/// Exact reference risk on a discrete environment.
pub fn exact_risk<P: Predictor + ?Sized>(
    f: &P,
    env: &Environment,
    gstar: ReferenceWeight,
    loss: LossKind,
) -> Result<f64> {
    let d = env
        .as_discrete()
        .ok_or_else(|| Error::NotDiscrete)?;
    Ok(exact_reference_risk(d, f, gstar, loss))
}
