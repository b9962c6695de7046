//! Risk measurement, replicated sweeps and convergence-rate fits.

mod experiment;
mod rate;
mod risk;
mod sweep;
pub mod stats;

pub use experiment::{
    aggregate, compare_schemes, rep_seeds, replicate_experiment, replicate_on, AggRow, Comparison, ExperimentConfig,
    ExperimentResult, RepRow, Verdict,
};
pub use rate::{fit_rate, fit_rate_replicated, ols_loglog, RateFit};
pub use risk::{
    exact_risk, excess_risk, excess_risk_mc, reference_risk_mc, RiskEstimate, TestSet,
    EXCESS_MC_DRAWS,
};
pub use sweep::{
    rate_sweep_on, run_rate_sweep, MarginSpec, PolicyClassSpec, RateSweepConfig, RateSweepResult, SweepFit,
    SweepRow, SweepTask,
};
