use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Draw;
use crate::dataset::{Context, ReferenceWeight};
use crate::error::{Error, Result};
use crate::predictor::Predictor;

/// Finite context support with a tabulated mean-outcome function, so every
/// population quantity is an exact finite sum.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteEnv {
    pub support: Vec<Context>,
    pub probs: Vec<f64>,
    /// `|support| x K`.
    pub mu: Vec<Vec<f64>>,
    /// Per-cell Gaussian noise standard deviation.
    pub noise_std: Vec<Vec<f64>>,
    cumulative: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `(y - f(x, a))^2`
    Squared,
    /// `y * f(x, a)`: the average outcome under the policy `f`.
    PolicyValue,
}

pub fn make_discrete(
    support: Vec<Context>,
    probs: Vec<f64>,
    mu_table: Vec<Vec<f64>>,
    noise_std: Vec<Vec<f64>>,
) -> Result<DiscreteEnv> {
    let n = support.len();
    if n == 0 {
        return Err(Error::invalid("empty context support"));
    }
    if probs.len() != n || mu_table.len() != n || noise_std.len() != n {
        return Err(Error::invalid("support, probabilities and tables differ in length"));
    }
    let d = support[0].dim();
    if d == 0 || support.iter().any(|c| c.dim() != d || !c.is_finite()) {
        return Err(Error::invalid("support points must share a positive dimension"));
    }
    for i in 0..n {
        for j in 0..i {
            if support[i] == support[j] {
                return Err(Error::invalid(format!("duplicate support point {i}")));
            }
        }
    }
    let k = mu_table[0].len();
    if k < 2 {
        return Err(Error::invalid("need at least 2 arms"));
    }
    if mu_table.iter().any(|r| r.len() != k || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("mu table must be |support| x K and finite"));
    }
    if noise_std
        .iter()
        .any(|r| r.len() != k || r.iter().any(|v| !(v.is_finite() && *v >= 0.0)))
    {
        return Err(Error::invalid("noise table must be |support| x K, finite, >= 0"));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid("negative or non-finite probability"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
    }
    let mut acc = 0.0;
    let cumulative = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    Ok(DiscreteEnv {
        support,
        probs,
        mu: mu_table,
        noise_std,
        cumulative,
    })
}

impl DiscreteEnv {
    /// Same noise level in every cell.
    pub fn with_noise(
        support: Vec<Context>,
        probs: Vec<f64>,
        mu_table: Vec<Vec<f64>>,
        noise_std: f64,
    ) -> Result<Self> {
        let k = mu_table.first().map_or(0, |r| r.len());
        let noise = vec![vec![noise_std; k]; mu_table.len()];
        make_discrete(support, probs, mu_table, noise)
    }

    /// One-hot style support: point 0 is the origin of `R^(n-1)`, point `i`
    /// is the `i`-th basis vector. Needs at least 2 points.
    pub fn indexed_support(n: usize) -> Vec<Context> {
        let d = (n.max(2)) - 1;
        (0..n)
            .map(|i| {
                let mut v = vec![0.0; d];
                if i > 0 {
                    v[i - 1] = 1.0;
                }
                Context(v)
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.support[0].dim()
    }

    pub fn num_arms(&self) -> usize {
        self.mu[0].len()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Draw {
        let u: f64 = rng.random();
        let i = self
            .cumulative
            .iter()
            .position(|c| u < *c)
            .unwrap_or(self.len() - 1);
        Draw {
            context: self.support[i].clone(),
            latent: i,
        }
    }

    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        self.support.iter().position(|c| c.0.as_slice() == x)
    }

    pub fn mean_bound(&self) -> f64 {
        self.mu
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `a*(x_i)`, ties to the lowest arm.
    pub fn optimal_arm(&self, i: usize) -> usize {
        let row = &self.mu[i];
        let mut best = 0;
        for a in 1..row.len() {
            if row[a] < row[best] {
                best = a;
            }
        }
        best
    }

    pub fn optimal_arms(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.optimal_arm(i)).collect()
    }

    /// `E mu*(X)`.
    pub fn optimal_value(&self) -> f64 {
        (0..self.len())
            .map(|i| self.probs[i] * self.mu[i][self.optimal_arm(i)])
            .sum()
    }

    /// Gap between the best and second-best arm at support point `i`.
    pub fn arm_gap(&self, i: usize) -> f64 {
        let star = self.optimal_arm(i);
        let best = self.mu[i][star];
        self.mu[i]
            .iter()
            .enumerate()
            .filter(|(a, _)| *a != star)
            .map(|(_, v)| v - best)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn has_unique_argmin(&self) -> bool {
        (0..self.len()).all(|i| self.arm_gap(i) > 0.0)
    }
}

/// `R*(f) = sum_x p(x) sum_a g*(a|x) E[loss(f, (x, a, Y))]`, exactly.
pub fn exact_reference_risk<P: Predictor + ?Sized>(
    env: &DiscreteEnv,
    f: &P,
    gstar: ReferenceWeight,
    loss: LossKind,
) -> f64 {
    let k = env.num_arms();
    let mut total = 0.0;
    for (i, x) in env.support.iter().enumerate() {
        let mut inner = 0.0;
        for a in 0..k {
            let w = gstar.value(a, k);
            if w == 0.0 {
                continue;
            }
            let mu = env.mu[i][a];
            let fx = f.predict(x, a);
            let term = match loss {
                LossKind::Squared => env.noise_std[i][a].powi(2) + (mu - fx).powi(2),
                LossKind::PolicyValue => mu * fx,
            };
            inner += w * term;
        }
        total += env.probs[i] * inner;
    }
    total
}
