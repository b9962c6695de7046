use rand::Rng;

use super::Draw;
use crate::dataset::Context;
use crate::error::{Error, Result};
use crate::seed::{child_rng, stage};

pub(super) fn uniform_box<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Draw {
    let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Draw {
        context: Context(x),
        latent: 0,
    }
}

fn check_dims(d: usize, k: usize, noise_std: f64) -> Result<()> {
    if d < 1 {
        return Err(Error::invalid("context dimension must be >= 1"));
    }
    if k < 2 {
        return Err(Error::invalid("need at least 2 arms"));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::invalid("noise std must be finite and >= 0"));
    }
    Ok(())
}

fn affine(theta: &[f64], x: &[f64]) -> f64 {
    theta[0] + theta[1..].iter().zip(x).map(|(t, v)| t * v).sum::<f64>()
}

/// `mu(x, a) = theta_a . (1, x)` on `x ~ U[-1, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEnv {
    pub dim: usize,
    pub num_arms: usize,
    /// One `(d+1)`-vector per arm, intercept first.
    pub theta: Vec<Vec<f64>>,
    pub noise_std: f64,
    pub bound: f64,
}

impl LinearEnv {
    pub fn from_coefficients(theta: Vec<Vec<f64>>, noise_std: f64) -> Result<Self> {
        let k = theta.len();
        let d = theta.first().map_or(0, |t| t.len().saturating_sub(1));
        check_dims(d, k, noise_std)?;
        if theta.iter().any(|t| t.len() != d + 1 || t.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("coefficient vectors must all have length d+1"));
        }
        let bound = theta
            .iter()
            .map(|t| t.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(LinearEnv {
            dim: d,
            num_arms: k,
            theta,
            noise_std,
            bound,
        })
    }

    pub fn mean(&self, x: &[f64], arm: usize) -> f64 {
        affine(&self.theta[arm], x)
    }
}

pub fn make_synthetic_linear(d: usize, k: usize, seed: u64, noise_std: f64) -> Result<LinearEnv> {
    check_dims(d, k, noise_std)?;
    let mut rng = child_rng(seed, 0, stage::ENV);
    let theta = (0..k)
        .map(|_| (0..=d).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    LinearEnv::from_coefficients(theta, noise_std)
}

/// Affine mean plus a per-arm quadratic bowl; a linear model class is
/// misspecified here.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticEnv {
    pub dim: usize,
    pub num_arms: usize,
    pub theta: Vec<Vec<f64>>,
    /// Per-arm, per-coordinate coefficients on `x_j^2`.
    pub curvature: Vec<Vec<f64>>,
    pub noise_std: f64,
    pub bound: f64,
}

impl QuadraticEnv {
    pub fn from_coefficients(
        theta: Vec<Vec<f64>>,
        curvature: Vec<Vec<f64>>,
        noise_std: f64,
    ) -> Result<Self> {
        let lin = LinearEnv::from_coefficients(theta, noise_std)?;
        if curvature.len() != lin.num_arms || curvature.iter().any(|c| c.len() != lin.dim) {
            return Err(Error::invalid("curvature must be K x d"));
        }
        let bound = lin
            .theta
            .iter()
            .zip(&curvature)
            .map(|(t, c)| {
                t.iter().map(|v| v.abs()).sum::<f64>() + c.iter().map(|v| v.abs()).sum::<f64>()
            })
            .fold(0.0, f64::max);
        Ok(QuadraticEnv {
            dim: lin.dim,
            num_arms: lin.num_arms,
            theta: lin.theta,
            curvature,
            noise_std,
            bound,
        })
    }

    pub fn mean(&self, x: &[f64], arm: usize) -> f64 {
        affine(&self.theta[arm], x)
            + self.curvature[arm]
                .iter()
                .zip(x)
                .map(|(c, v)| c * v * v)
                .sum::<f64>()
    }
}

pub fn make_synthetic_quadratic(
    d: usize,
    k: usize,
    seed: u64,
    noise_std: f64,
    curvature: f64,
) -> Result<QuadraticEnv> {
    check_dims(d, k, noise_std)?;
    let mut rng = child_rng(seed, 0, stage::ENV);
    let theta = (0..k)
        .map(|_| (0..=d).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    let curv = (0..k)
        .map(|_| (0..d).map(|_| curvature * rng.random_range(-1.0..=1.0)).collect())
        .collect();
    QuadraticEnv::from_coefficients(theta, curv, noise_std)
}

/// Sum of axis-aligned steps: `mu(x, a) = b_a + sum_j h_aj 1{x_j > tau_aj}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEnv {
    pub dim: usize,
    pub num_arms: usize,
    pub base: Vec<f64>,
    pub heights: Vec<Vec<f64>>,
    pub thresholds: Vec<Vec<f64>>,
    pub noise_std: f64,
    pub bound: f64,
}

impl StepEnv {
    pub fn mean(&self, x: &[f64], arm: usize) -> f64 {
        self.base[arm]
            + self.heights[arm]
                .iter()
                .zip(&self.thresholds[arm])
                .zip(x)
                .map(|((h, t), v)| if *v > *t { *h } else { 0.0 })
                .sum::<f64>()
    }
}

pub fn make_synthetic_step(d: usize, k: usize, seed: u64, noise_std: f64) -> Result<StepEnv> {
    check_dims(d, k, noise_std)?;
    let mut rng = child_rng(seed, 0, stage::ENV);
    let mut base = Vec::with_capacity(k);
    let mut heights = Vec::with_capacity(k);
    let mut thresholds = Vec::with_capacity(k);
    for _ in 0..k {
        base.push(rng.random_range(-1.0..=1.0));
        heights.push((0..d).map(|_| rng.random_range(-1.0..=1.0)).collect::<Vec<f64>>());
        thresholds.push((0..d).map(|_| rng.random_range(-0.5..=0.5)).collect::<Vec<f64>>());
    }
    let bound = base
        .iter()
        .zip(&heights)
        .map(|(b, h): (&f64, &Vec<f64>)| b.abs() + h.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(StepEnv {
        dim: d,
        num_arms: k,
        base,
        heights,
        thresholds,
        noise_std,
        bound,
    })
}
