//! Penalty selection by weighted K-fold cross-validation.
//!
//! Folds are contiguous blocks of the time-ordered data. Each candidate is
//! fit on the complement of a fold with the training weights and scored by
//! weighted squared error on the fold with the fold's weights; the score of a
//! penalty is the pooled weighted SSE over the total held-out weight.

use serde::{Deserialize, Serialize};

use super::lasso::{lambda_max, lasso_from_normal_equations};
use super::linalg::NormalEquations;
use super::wls::{check_design, normal_equations};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalized {
    Ridge,
    Lasso,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda: f64,
    pub coefficients: Vec<f64>,
    /// `(lambda, cv error)` for each distinct grid value, ascending.
    pub path: Vec<(f64, f64)>,
}

pub const LASSO_TOL: f64 = 1e-8;
pub const LASSO_MAX_SWEEPS: usize = 10_000;

pub fn default_ridge_grid() -> Vec<f64> {
    (-3..=4).map(|e| 10f64.powi(e)).collect()
}

/// Twelve log-spaced penalties from `lambda_max` down to `1e-4 lambda_max`.
pub fn default_lasso_grid(features: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let ne = normal_equations(features, y, w)?;
    let top = lambda_max(&ne).max(1e-12);
    let n = 12;
    Ok((0..n)
        .map(|i| top * 10f64.powf(-4.0 * i as f64 / (n - 1) as f64))
        .collect())
}

fn fit_one(
    learner: Penalized,
    ne: &NormalEquations,
    lambda: f64,
    warm: Option<&[f64]>,
) -> Result<Vec<f64>> {
    match learner {
        Penalized::Ridge => ne.solve(lambda, false),
        Penalized::Lasso => {
            Ok(lasso_from_normal_equations(ne, lambda, LASSO_TOL, LASSO_MAX_SWEEPS, warm, None).coefficients)
        }
    }
}

pub fn fit_penalized(
    learner: Penalized,
    features: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    let ne = normal_equations(features, y, w)?;
    fit_one(learner, &ne, lambda, None)
}

pub fn cv_select_lambda(
    learner: Penalized,
    features: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
    folds: usize,
    lambda_grid: &[f64],
) -> Result<CvResult> {
    if lambda_grid.is_empty() {
        return Err(Error::invalid("empty lambda grid"));
    }
    if lambda_grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::invalid("lambda grid values must be finite and >= 0"));
    }
    let p = check_design(features, y, w)?;
    let n = features.len();
    if folds < 2 || n < folds {
        return Err(Error::invalid(format!("need 2 <= folds <= n (folds {folds}, n {n})")));
    }
    let mut grid = lambda_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut per_fold = Vec::with_capacity(folds);
    let mut full = NormalEquations::new(p);
    for f in 0..folds {
        let (lo, hi) = (f * n / folds, (f + 1) * n / folds);
        let mut ne = NormalEquations::new(p);
        for i in lo..hi {
            ne.add(&features[i], y[i], w[i]);
        }
        full.merge(&ne);
        per_fold.push(ne);
    }

    let mut path = Vec::with_capacity(grid.len());
    // Lasso fits along the grid warm-start from the previous (larger) penalty.
    let mut warm: Vec<Option<Vec<f64>>> = vec![None; folds];
    let order: Vec<usize> = match learner {
        Penalized::Lasso => (0..grid.len()).rev().collect(),
        Penalized::Ridge => (0..grid.len()).collect(),
    };
    let mut errors = vec![f64::NAN; grid.len()];
    for &gi in &order {
        let lambda = grid[gi];
        let (mut sse, mut held_w) = (0.0, 0.0);
        for f in 0..folds {
            let mut train = full.clone();
            train.subtract(&per_fold[f]);
            if !(train.total_weight > 0.0) || !(per_fold[f].total_weight > 0.0) {
                continue;
            }
            let theta = fit_one(learner, &train, lambda, warm[f].as_deref())?;
            sse += per_fold[f].weighted_sse(&theta);
            held_w += per_fold[f].total_weight;
            if learner == Penalized::Lasso {
                warm[f] = Some(theta);
            }
        }
        errors[gi] = if held_w > 0.0 { sse / held_w } else { f64::INFINITY };
    }
    let mut best = 0;
    for (i, (&lambda, &err)) in grid.iter().zip(&errors).enumerate() {
        path.push((lambda, err));
        if err < errors[best] {
            best = i;
        }
    }
    let lambda = grid[best];
    let coefficients = fit_one(learner, &full, lambda, None)?;
    Ok(CvResult {
        lambda,
        coefficients,
        path,
    })
}
