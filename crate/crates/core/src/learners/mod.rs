//! Weighted learners: least squares, lasso, CART and policy search.

mod cart;
mod cv;
mod features;
mod lasso;
mod linalg;
mod model;
mod policy;
mod wls;

pub use cart::{fit_cart, tree_sse, TreeModel, TreeNode};
pub use cv::{
    cv_select_lambda, default_lasso_grid, default_ridge_grid, fit_penalized, CvResult, Penalized,
};
pub use features::{FeatureMap, FeatureMode};
pub use lasso::{fit_lasso_cd, fit_lasso_cd_traced, lambda_max, lasso_objective, LassoFit};
pub use linalg::{solve_psd, NormalEquations};
pub use model::{design_matrix, fit_design, fit_model, FittedModel, ModelKind, ModelSpec, RegressionModel};
pub use policy::{
    fit_policy_iswerm, policy_empirical_risk, threshold_grid, FinitePolicyClass,
    FiniteRiskAccumulator, Policy, PolicyClass, PolicyFit, PolicyNode, TreePolicyClass,
};
pub use wls::{fit_wls, normal_equations, wls_objective, LinearModel};
