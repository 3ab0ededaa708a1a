//! JSON run configuration and float formatting shared by all exports.
//!
//! Every block is optional and every field has a default, so `{}` is a valid
//! configuration:
//!
//! ```json
//! {
//!   "dgp":        { "setting": 1, "w": 1.0, "gamma0": 0.0, "gamma1": 1.0, "n": 500, "setting1_corrected": false },
//!   "budget":     { "n_initial": 50, "n_ei": 50, "ei_stop_threshold": 1e-6 },
//!   "gp":         { "tune": { "nu": "1.5", "restarts": 8, ... }, "per_point_noise": false, "retune_restarts": 1, ... },
//!   "mcmc":       { "chains": 4, "iterations": 5000, "burn_in": 2500, "target_acceptance": 0.234, ... },
//!   "simulation": { "population_size": 10000, "repeats": 30, "n_value_draws": 100 },
//!   "bench":      { "runs": 200, "characterize": false, "grid_resolution": 100, "truth_resolution": 400 },
//!   "pad":        { ... synthetic cohort parameters ... }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bayesopt::{Budget, GpConfig};
use crate::compliance::{McmcConfig, PadSpec, SimConfig};
use crate::error::Result;
use crate::simbench::DgpSpec;

/// 17 significant digits in scientific notation; parses back to the same
/// `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub runs: usize,
    pub characterize: bool,
    pub grid_resolution: usize,
    pub truth_resolution: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            runs: 200,
            characterize: false,
            grid_resolution: 100,
            truth_resolution: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub dgp: DgpSpec,
    pub budget: Budget,
    pub gp: GpConfig,
    pub mcmc: McmcConfig,
    pub simulation: SimConfig,
    pub bench: BenchConfig,
    pub pad: PadSpec,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2e-300, 12345.678, 0.0, f64::MIN_POSITIVE, 5e-324] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn empty_config_is_default() {
        assert_eq!(Config::from_json("{}").unwrap(), Config::default());
        let c = Config::from_json(r#"{"budget": {"n_ei": 7}, "dgp": {"setting": 3}}"#).unwrap();
        assert_eq!(c.budget.n_ei, 7);
        assert_eq!(c.budget.n_initial, 50);
        assert_eq!(c.dgp.setting, 3);
        assert!(Config::from_json(r#"{"nope": 1}"#).is_err());
    }
}
