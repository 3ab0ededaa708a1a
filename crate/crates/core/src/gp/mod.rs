//! Gaussian-process regression over policy-parameter space.
//!
//! Exact conditioning with a Matérn ARD kernel plus white noise, an optional
//! per-point noise vector for heteroscedastic value estimates, and
//! derivative-free marginal-likelihood tuning. Tuning does not use analytic
//! gradients.

mod kernel;
mod model;
mod tune;

pub use kernel::{kernel_eval, KernelSpec, Smoothness};
pub use model::{
    log_marginal_likelihood, GpModel, GpModelDocument, PredictiveDistribution, JITTER_LADDER,
    NEGATIVE_VARIANCE_TOLERANCE,
};
pub use tune::{tune_hyperparameters, tune_with_warm_start, TuneConfig};

use crate::error::Result;
use crate::policy::PolicyParams;

/// Tune hyperparameters, then fit. Convenience used by the optimizer and
/// the characterization step.
pub fn fit_tuned(
    inputs: Vec<PolicyParams>,
    targets: Vec<f64>,
    per_point_noise: Option<Vec<f64>>,
    config: &TuneConfig,
    warm_start: Option<&KernelSpec>,
) -> Result<GpModel> {
    let kernel = tune_with_warm_start(&inputs, &targets, per_point_noise.as_deref(), config, warm_start)?;
    GpModel::fit(kernel, inputs, targets, per_point_noise, config.center)
}
