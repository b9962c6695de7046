//! Weighted lasso by cyclic coordinate descent.
//!
//! Objective: `(1/W) sum w_i (y_i - theta.phi_i)^2 + 2 lambda sum_{j>=1} |theta_j|`
//! with `W = sum w_i`. Column 0 is the unpenalized intercept. The sweeps run
//! on the weighted Gram matrix, so their cost does not grow with `n`.

use serde::{Deserialize, Serialize};

use super::linalg::NormalEquations;
use super::wls::{dot, normal_equations};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub objective: f64,
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

pub fn fit_lasso_cd(
    features: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<LassoFit> {
    let ne = normal_equations(features, y, w)?;
    Ok(lasso_from_normal_equations(&ne, lambda, tol, max_iter, None, None))
}

/// Like [`fit_lasso_cd`] but records the objective after every sweep.
pub fn fit_lasso_cd_traced(
    features: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(LassoFit, Vec<f64>)> {
    let ne = normal_equations(features, y, w)?;
    let mut trace = Vec::new();
    let fit = lasso_from_normal_equations(&ne, lambda, tol, max_iter, None, Some(&mut trace));
    Ok((fit, trace))
}

pub fn lasso_objective(features: &[Vec<f64>], y: &[f64], w: &[f64], lambda: f64, theta: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    let sse: f64 = features
        .iter()
        .zip(y)
        .zip(w)
        .map(|((phi, yi), wi)| wi * (yi - dot(theta, phi)).powi(2))
        .sum();
    sse / total + 2.0 * lambda * theta[1..].iter().map(|t| t.abs()).sum::<f64>()
}

/// Smallest penalty at which every non-intercept coefficient is zero, for a
/// design whose first column is constant one.
pub fn lambda_max(ne: &NormalEquations) -> f64 {
    let p = ne.dim;
    let w = ne.total_weight;
    let g00 = ne.xtwx[0];
    let ybar = if g00 > 0.0 { ne.xtwy[0] / g00 } else { 0.0 };
    (1..p)
        .map(|j| ((ne.xtwy[j] - ne.xtwx[j] * ybar) / w).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn lasso_from_normal_equations(
    ne: &NormalEquations,
    lambda: f64,
    tol: f64,
    max_iter: usize,
    warm_start: Option<&[f64]>,
    mut trace: Option<&mut Vec<f64>>,
) -> LassoFit {
    let p = ne.dim;
    let inv_w = 1.0 / ne.total_weight;
    let g = ne.gram() * inv_w;
    let c: Vec<f64> = ne.xtwy.iter().map(|v| v * inv_w).collect();
    let yy = ne.ytwy * inv_w;

    let mut theta = warm_start.map_or_else(|| vec![0.0; p], |t| t.to_vec());
    let mut q: Vec<f64> = (0..p)
        .map(|i| (0..p).map(|j| g[(i, j)] * theta[j]).sum())
        .collect();

    let objective = |theta: &[f64], q: &[f64]| {
        let quad: f64 = theta.iter().zip(q).map(|(t, v)| t * v).sum();
        yy - 2.0 * dot(theta, &c) + quad + 2.0 * lambda * theta[1..].iter().map(|t| t.abs()).sum::<f64>()
    };

    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < max_iter {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..p {
            let gjj = g[(j, j)];
            let old = theta[j];
            let new = if gjj > 0.0 {
                let z = c[j] - (q[j] - gjj * old);
                if j == 0 {
                    z / gjj
                } else {
                    soft_threshold(z, lambda) / gjj
                }
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                theta[j] = new;
                for i in 0..p {
                    q[i] += delta * g[(i, j)];
                }
                max_change = max_change.max(delta.abs());
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(objective(&theta, &q));
        }
        if max_change < tol {
            converged = true;
            break;
        }
    }
    let obj = objective(&theta, &q);
    LassoFit {
        coefficients: theta,
        sweeps,
        converged,
        objective: obj,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::wls::fit_wls;
    use crate::seed::rng_from_seed;
    use rand::Rng;

    fn design(seed: u64, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let mut rng = rng_from_seed(seed);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut r = vec![1.0];
                r.extend((1..p).map(|_| rng.random_range(-1.0..1.0)));
                r
            })
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| (j as f64 - 1.0) * v).sum::<f64>() + rng.random_range(-0.5..0.5))
            .collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..4.0)).collect();
        (x, y, w)
    }

    #[test]
    fn zero_penalty_matches_wls() {
        let (x, y, w) = design(1, 60, 4);
        let lasso = fit_lasso_cd(&x, &y, &w, 0.0, 1e-12, 100_000).unwrap();
        assert!(lasso.converged);
        let wls = fit_wls(&x, &y, &w, 0.0).unwrap();
        for (a, b) in lasso.coefficients.iter().zip(&wls) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn kill_condition_zeroes_everything() {
        let (x, y, w) = design(2, 50, 5);
        let ne = normal_equations(&x, &y, &w).unwrap();
        let lmax = lambda_max(&ne);
        let fit = fit_lasso_cd(&x, &y, &w, lmax, 1e-12, 1000).unwrap();
        assert!(fit.coefficients[1..].iter().all(|c| *c == 0.0), "{:?}", fit.coefficients);
        let wsum: f64 = w.iter().sum();
        let ybar = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / wsum;
        assert!((fit.coefficients[0] - ybar).abs() < 1e-12);
        let below = fit_lasso_cd(&x, &y, &w, 0.99 * lmax, 1e-12, 1000).unwrap();
        assert!(below.coefficients[1..].iter().any(|c| *c != 0.0));
    }

    #[test]
    fn objective_never_increases() {
        let (x, y, w) = design(3, 80, 6);
        let (fit, trace) = fit_lasso_cd_traced(&x, &y, &w, 0.05, 1e-12, 500).unwrap();
        assert!(fit.converged);
        for pair in trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-14);
        }
        let direct = lasso_objective(&x, &y, &w, 0.05, &fit.coefficients);
        assert!((direct - fit.objective).abs() < 1e-9);
    }

    #[test]
    fn max_iter_reported() {
        let (x, y, w) = design(4, 40, 5);
        let fit = fit_lasso_cd(&x, &y, &w, 0.0, 0.0, 2).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.sweeps, 2);
    }
}
