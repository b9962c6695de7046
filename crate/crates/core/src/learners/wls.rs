use serde::{Deserialize, Serialize};

use super::features::FeatureMap;
use super::linalg::NormalEquations;
use crate::error::{Error, Result};
use crate::predictor::Predictor;

/// Linear predictor `theta . phi(x, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub feature_map: FeatureMap,
}

impl LinearModel {
    pub fn new(coefficients: Vec<f64>, feature_map: FeatureMap) -> Result<Self> {
        if coefficients.len() != feature_map.dim() {
            return Err(Error::invalid(format!(
                "{} coefficients for a {}-dimensional feature map",
                coefficients.len(),
                feature_map.dim()
            )));
        }
        Ok(LinearModel {
            coefficients,
            feature_map,
        })
    }

    pub fn try_predict(&self, x: &[f64], arm: usize) -> Result<f64> {
        let phi = self.feature_map.build(x, arm)?;
        Ok(dot(&self.coefficients, &phi))
    }
}

impl Predictor for LinearModel {
    fn predict(&self, x: &[f64], arm: usize) -> f64 {
        self.try_predict(x, arm)
            .expect("context or arm incompatible with the model's feature map")
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_design(features: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<usize> {
    let n = features.len();
    if n == 0 {
        return Err(Error::invalid("no observations"));
    }
    if y.len() != n || w.len() != n {
        return Err(Error::invalid("features, outcomes and weights differ in length"));
    }
    let p = features[0].len();
    if p == 0 || features.iter().any(|r| r.len() != p) {
        return Err(Error::invalid("ragged or empty feature rows"));
    }
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("weights must be finite and >= 0"));
    }
    if !w.iter().any(|v| *v > 0.0) {
        return Err(Error::Degenerate("all weights are zero".into()));
    }
    Ok(p)
}

pub fn normal_equations(features: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<NormalEquations> {
    let p = check_design(features, y, w)?;
    let mut ne = NormalEquations::new(p);
    for ((phi, yi), wi) in features.iter().zip(y).zip(w) {
        ne.add(phi, *yi, *wi);
    }
    Ok(ne)
}

/// Weighted least squares with an optional ridge penalty on every
/// coefficient but the first (the intercept column).
pub fn fit_wls(features: &[Vec<f64>], y: &[f64], w: &[f64], ridge_lambda: f64) -> Result<Vec<f64>> {
    normal_equations(features, y, w)?.solve(ridge_lambda, false)
}

/// `sum w (y - theta.phi)^2 + lambda ||theta_{1..}||^2`.
pub fn wls_objective(features: &[Vec<f64>], y: &[f64], w: &[f64], ridge_lambda: f64, theta: &[f64]) -> f64 {
    let sse: f64 = features
        .iter()
        .zip(y)
        .zip(w)
        .map(|((phi, yi), wi)| wi * (yi - dot(theta, phi)).powi(2))
        .sum();
    sse + ridge_lambda * theta[1..].iter().map(|t| t * t).sum::<f64>()
}
