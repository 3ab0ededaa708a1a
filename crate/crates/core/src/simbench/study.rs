use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{generate_dataset, DgpSpec};
use super::oracle::{grid_optimum, oracle_value, OracleValue};
use super::surface::{characterize_policy_class, surrogate_norms};
use crate::bayesopt::{optimize_policy, Budget, GpConfig};
use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::numeric::{mean, sample_sd};
use crate::policy::{ParamBox, Policy, PolicyParams, ThresholdPolicy};
use crate::rng;

/// One (setting, n, w, estimator) combination of the study grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub dgp: DgpSpec,
    pub estimator: Estimator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub runs: usize,
    pub budget: Budget,
    pub gp: GpConfig,
    pub seed: u64,
    /// Also fit a surrogate over the parameter grid after each run and
    /// record its L1/L2 distance to the oracle surface.
    pub characterize: bool,
    pub grid_resolution: usize,
    pub truth_resolution: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            runs: 200,
            budget: Budget::default(),
            gp: GpConfig::default(),
            seed: 0,
            characterize: false,
            grid_resolution: 100,
            truth_resolution: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub best_theta: PolicyParams,
    /// Estimated value at the best evaluated parameters.
    pub best_estimate: f64,
    /// True value of the policy the run selected.
    pub oracle_value: f64,
    /// `(oracle_value - optimum)^2`: regret of the selected policy.
    pub squared_error: f64,
    /// `(best_estimate - optimum)^2`: error of the reported optimal value.
    pub estimate_squared_error: f64,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub setting: u8,
    pub n: usize,
    pub w: f64,
    pub estimator: String,
    pub runs: usize,
    pub excluded: usize,
    pub mse: f64,
    /// Standard error of `mse` across runs.
    pub mc_error: f64,
    /// Mean of `estimate_squared_error` across runs.
    pub estimate_mse: f64,
    pub estimate_mc_error: f64,
    pub true_optimum: OracleValue,
    pub mean_l1: Option<f64>,
    pub mean_l2: Option<f64>,
    pub results: Vec<RunResult>,
    pub errors: Vec<String>,
}

/// Seeds are derived from the master seed and run index only, so every cell
/// sees the same uniforms for a given run (common random numbers).
fn run_once(cell: &StudyCell, cfg: &StudyConfig, truth: &OracleValue, truth_grid: Option<&[f64]>, run: usize) -> Result<RunResult> {
    let data = generate_dataset(&cell.dgp, rng::derive(cfg.seed, 10, run as u64))?;
    let prepared = cell.estimator.prepare(&data)?;
    let bx = ParamBox::unit_square();
    let trace = optimize_policy(
        |theta| {
            let policy = Policy::Threshold(ThresholdPolicy::new(theta.0[0], theta.0[1]));
            let est = prepared.estimate(&data, &policy)?;
            Ok((est.value, est.std_dev))
        },
        &bx,
        &cfg.budget,
        &cfg.gp,
        rng::derive(cfg.seed, 11, run as u64),
    )?;
    let chosen = ThresholdPolicy::new(trace.best_theta.0[0], trace.best_theta.0[1]);
    let value = oracle_value(&cell.dgp, &chosen).value;
    let (l1, l2) = match truth_grid {
        Some(t) => {
            let res = cfg.grid_resolution;
            let tune = crate::gp::TuneConfig {
                seed: rng::derive(cfg.seed, 12, run as u64),
                ..cfg.gp.tune.clone()
            };
            let grid = characterize_policy_class(&trace.records, &bx, &[res, res], &tune, None)?;
            let (a, b) = surrogate_norms(&grid.surrogate_mean, t);
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    Ok(RunResult {
        run,
        best_theta: trace.best_theta.clone(),
        best_estimate: trace.best_value,
        oracle_value: value,
        squared_error: (value - truth.value).powi(2),
        estimate_squared_error: (trace.best_value - truth.value).powi(2),
        l1,
        l2,
    })
}

fn oracle_grid(dgp: &DgpSpec, resolution: usize) -> Result<Vec<f64>> {
    Ok(crate::policy::enumerate_grid(&ParamBox::unit_square(), &[resolution, resolution])?
        .iter()
        .map(|p| oracle_value(dgp, &ThresholdPolicy::new(p.0[0], p.0[1])).value)
        .collect())
}

/// Run every replicate of one cell in parallel and aggregate.
pub fn run_cell(cell: &StudyCell, cfg: &StudyConfig) -> Result<RunSummary> {
    if cfg.runs < 2 {
        return Err(Error::argument("a study needs at least two runs"));
    }
    cell.dgp.validate()?;
    let truth = grid_optimum(&cell.dgp, cfg.truth_resolution);
    let truth_grid = if cfg.characterize {
        Some(oracle_grid(&cell.dgp, cfg.grid_resolution)?)
    } else {
        None
    };
    let outcomes: Vec<Result<RunResult>> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| run_once(cell, cfg, &truth, truth_grid.as_deref(), run))
        .collect();
    let mut results = Vec::with_capacity(cfg.runs);
    let mut errors = Vec::new();
    for (run, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => results.push(r),
            Err(e) => errors.push(format!("run {run}: {e}")),
        }
    }
    summarize(cell, cfg, truth, results, errors)
}

fn summarize(
    cell: &StudyCell,
    cfg: &StudyConfig,
    truth: OracleValue,
    results: Vec<RunResult>,
    errors: Vec<String>,
) -> Result<RunSummary> {
    if results.is_empty() {
        return Err(Error::Estimation(format!(
            "every run failed; first error: {}",
            errors.first().map(String::as_str).unwrap_or("none")
        )));
    }
    let mean_and_se = |f: fn(&RunResult) -> f64| -> (f64, f64) {
        let v: Vec<f64> = results.iter().map(f).collect();
        let se = if v.len() > 1 {
            sample_sd(&v) / (v.len() as f64).sqrt()
        } else {
            0.0
        };
        (mean(&v), se)
    };
    let (mse, mc_error) = mean_and_se(|r| r.squared_error);
    let (estimate_mse, estimate_mc_error) = mean_and_se(|r| r.estimate_squared_error);
    let norm_mean = |f: fn(&RunResult) -> Option<f64>| -> Option<f64> {
        let v: Option<Vec<f64>> = results.iter().map(f).collect();
        v.map(|v| mean(&v))
    };
    Ok(RunSummary {
        setting: cell.dgp.setting,
        n: cell.dgp.n,
        w: cell.dgp.w,
        estimator: cell.estimator.name().to_string(),
        runs: cfg.runs,
        excluded: errors.len(),
        mse,
        mc_error,
        estimate_mse,
        estimate_mc_error,
        true_optimum: truth,
        mean_l1: norm_mean(|r| r.l1),
        mean_l2: norm_mean(|r| r.l2),
        results,
        errors,
    })
}

/// Run a list of cells sequentially, each cell parallel over its runs.
pub fn run_simulation_study(cells: &[StudyCell], cfg: &StudyConfig) -> Result<Vec<RunSummary>> {
    cells.iter().map(|c| run_cell(c, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> StudyConfig {
        StudyConfig {
            runs: 2,
            budget: Budget {
                n_initial: 10,
                n_ei: 3,
                ..Budget::default()
            },
            truth_resolution: 50,
            grid_resolution: 10,
            ..StudyConfig::default()
        }
    }

    #[test]
    fn deterministic_rerun() {
        let cell = StudyCell {
            dgp: DgpSpec::new(2, 1.0, 100).unwrap(),
            estimator: Estimator::Ipw,
        };
        let cfg = StudyConfig {
            characterize: true,
            ..small()
        };
        let a = run_cell(&cell, &cfg).unwrap();
        let b = run_cell(&cell, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.results.len(), 2);
        assert!(a.mse >= 0.0 && a.mc_error >= 0.0);
        assert!(a.estimate_mse >= 0.0 && a.estimate_mc_error >= 0.0);
        for r in &a.results {
            assert!(r.l1.unwrap() <= r.l2.unwrap());
        }
    }

    #[test]
    fn needs_two_runs() {
        let cell = StudyCell {
            dgp: DgpSpec::new(1, 1.0, 50).unwrap(),
            estimator: Estimator::Sipw,
        };
        let cfg = StudyConfig { runs: 1, ..small() };
        assert!(run_cell(&cell, &cfg).is_err());
    }
}
