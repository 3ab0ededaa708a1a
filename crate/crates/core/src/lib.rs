//! Bayesian optimization and policy-class characterization for
//! finite-parameter dynamic treatment regimes.
//!
//! The crate is organized around the pieces of the workflow:
//!
//! * [`policy`]: parameter boxes and decision rules.
//! * [`estimators`]: IPW, stabilized IPW, G-computation and AIPWE value
//!   estimators on single-decision data.
//! * [`gp`]: Gaussian-process surrogate of the value function.
//! * [`bayesopt`]: expected-improvement search over a parameter box.
//! * [`compliance`]: Bayesian imputation-based value estimation under
//!   one-sided partial compliance.
//! * [`simbench`]: simulation settings, closed-form oracles, the simulation
//!   study harness, surface characterization and exports.
//! * [`cli`]: the `dtrgp` command-line front end.

pub mod bayesopt;
pub mod cli;
pub mod compliance;
pub mod config;
pub mod error;
pub mod estimators;
pub mod gp;
pub mod numeric;
pub mod policy;
pub mod rng;
pub mod simbench;

pub use error::{Error, Result};
