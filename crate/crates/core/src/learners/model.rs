use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::cart::{fit_cart, TreeModel};
use super::cv::{cv_select_lambda, default_lasso_grid, default_ridge_grid, fit_penalized, Penalized};
use super::features::{FeatureMap, FeatureMode};
use super::wls::{fit_wls, LinearModel};
use crate::dataset::LoggedDataset;
use crate::error::{Error, Result};
use crate::predictor::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Plain weighted least squares (min-norm when singular).
    Wls,
    Ridge,
    Lasso,
    Cart,
}

impl ModelKind {
    pub const BENCH: [ModelKind; 3] = [ModelKind::Ridge, ModelKind::Lasso, ModelKind::Cart];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Wls => "wls",
            ModelKind::Ridge => "ridge",
            ModelKind::Lasso => "lasso",
            ModelKind::Cart => "cart",
        }
    }

    pub fn feature_mode(&self) -> FeatureMode {
        match self {
            ModelKind::Cart => FeatureMode::TreeConcat,
            _ => FeatureMode::LinearInteracted,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wls" => Ok(ModelKind::Wls),
            "ridge" => Ok(ModelKind::Ridge),
            "lasso" => Ok(ModelKind::Lasso),
            "cart" => Ok(ModelKind::Cart),
            other => Err(Error::invalid(format!(
                "unknown model '{other}' (expected wls, ridge, lasso or cart)"
            ))),
        }
    }
}

/// How to fit a regression model to logged data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub cv_folds: usize,
    /// Penalty grid for ridge/lasso. Empty means the built-in default.
    pub lambda_grid: Vec<f64>,
    /// Fixed penalty; skips cross-validation when set.
    pub lambda: Option<f64>,
    pub max_depth: Option<usize>,
    pub min_leaf_weight: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            kind: ModelKind::Ridge,
            cv_folds: 4,
            lambda_grid: Vec::new(),
            lambda: None,
            max_depth: None,
            min_leaf_weight: 0.0,
        }
    }
}

impl ModelSpec {
    pub fn of_kind(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            ..ModelSpec::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RegressionModel {
    Linear(LinearModel),
    Tree {
        tree: TreeModel,
        feature_map: FeatureMap,
    },
}

impl RegressionModel {
    pub fn feature_map(&self) -> &FeatureMap {
        match self {
            RegressionModel::Linear(m) => &m.feature_map,
            RegressionModel::Tree { feature_map, .. } => feature_map,
        }
    }

    pub fn try_predict(&self, x: &[f64], arm: usize) -> Result<f64> {
        match self {
            RegressionModel::Linear(m) => m.try_predict(x, arm),
            RegressionModel::Tree { tree, feature_map } => {
                Ok(tree.predict_features(&feature_map.build(x, arm)?))
            }
        }
    }
}

impl Predictor for RegressionModel {
    fn predict(&self, x: &[f64], arm: usize) -> f64 {
        self.try_predict(x, arm)
            .expect("context or arm incompatible with the model's feature map")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub model: RegressionModel,
    /// Selected (or fixed) penalty for ridge/lasso.
    pub lambda: Option<f64>,
}

pub fn design_matrix(ds: &LoggedDataset, map: &FeatureMap) -> Result<Vec<Vec<f64>>> {
    ds.records
        .iter()
        .map(|r| map.build(&r.context, r.action))
        .collect()
}

/// Fits `spec` to `ds` with per-record weights.
pub fn fit_model(spec: &ModelSpec, ds: &LoggedDataset, weights: &[f64]) -> Result<FittedModel> {
    if weights.len() != ds.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} records",
            weights.len(),
            ds.len()
        )));
    }
    let map = FeatureMap::new(spec.kind.feature_mode(), ds.context_dim, ds.num_arms);
    let x = design_matrix(ds, &map)?;
    let y: Vec<f64> = ds.records.iter().map(|r| r.outcome).collect();
    fit_design(spec, map, &x, &y, weights)
}

pub fn fit_design(
    spec: &ModelSpec,
    map: FeatureMap,
    x: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
) -> Result<FittedModel> {
    let linear = |coefficients, lambda| -> Result<FittedModel> {
        Ok(FittedModel {
            model: RegressionModel::Linear(LinearModel::new(coefficients, map)?),
            lambda,
        })
    };
    match spec.kind {
        ModelKind::Wls => linear(fit_wls(x, y, w, spec.lambda.unwrap_or(0.0))?, spec.lambda),
        ModelKind::Ridge | ModelKind::Lasso => {
            let learner = if spec.kind == ModelKind::Ridge {
                Penalized::Ridge
            } else {
                Penalized::Lasso
            };
            if let Some(lambda) = spec.lambda {
                return linear(fit_penalized(learner, x, y, w, lambda)?, Some(lambda));
            }
            let grid = if !spec.lambda_grid.is_empty() {
                spec.lambda_grid.clone()
            } else if learner == Penalized::Ridge {
                default_ridge_grid()
            } else {
                default_lasso_grid(x, y, w)?
            };
            let cv = cv_select_lambda(learner, x, y, w, spec.cv_folds, &grid)?;
            linear(cv.coefficients, Some(cv.lambda))
        }
        ModelKind::Cart => Ok(FittedModel {
            model: RegressionModel::Tree {
                tree: fit_cart(x, y, w, spec.max_depth, spec.min_leaf_weight)?,
                feature_map: map,
            },
            lambda: None,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in [ModelKind::Wls, ModelKind::Ridge, ModelKind::Lasso, ModelKind::Cart] {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("svm".parse::<ModelKind>().is_err());
    }

    #[test]
    fn single_leaf_tree_predicts_leaf_value() {
        let map = FeatureMap::new(FeatureMode::TreeConcat, 2, 3);
        let x: Vec<Vec<f64>> = (0..6).map(|i| map.build(&[i as f64, 0.0], i % 3).unwrap()).collect();
        let fit = fit_design(&ModelSpec::of_kind(ModelKind::Cart), map, &x, &[1.5; 6], &[1.0; 6]).unwrap();
        for a in 0..3 {
            assert_eq!(fit.model.predict(&[-7.0, 3.0], a), 1.5);
        }
        assert!(fit.model.try_predict(&[0.0], 0).is_err());
    }

    #[test]
    fn zero_coefficients_predict_zero() {
        let map = FeatureMap::new(FeatureMode::LinearInteracted, 2, 2);
        let m = RegressionModel::Linear(LinearModel::new(vec![0.0; map.dim()], map).unwrap());
        assert_eq!(m.predict(&[0.3, -2.0], 1), 0.0);
    }
}
