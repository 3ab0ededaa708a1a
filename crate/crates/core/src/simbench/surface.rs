use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bayesopt::EvaluationRecord;
use crate::config::fmt_f64;
use crate::error::{Error, Result};
use crate::gp::{fit_tuned, KernelSpec, TuneConfig};
use crate::policy::{enumerate_grid, ParamBox, PolicyParams};

/// Width of one level-set bin in value units.
pub const LEVEL_WIDTH: f64 = 0.05;

pub fn level_of(value: f64) -> i64 {
    (value / LEVEL_WIDTH).floor() as i64
}

/// Surrogate-mean evaluations over a lattice of the parameter box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub param_box: ParamBox,
    pub resolution: Vec<usize>,
    pub points: Vec<PolicyParams>,
    pub surrogate_mean: Vec<f64>,
    pub truth: Option<Vec<f64>>,
    pub levels: Vec<i64>,
    /// Mean absolute surrogate error over the grid.
    pub l1: Option<f64>,
    /// Root-mean-square surrogate error over the grid.
    pub l2: Option<f64>,
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub evaluated: Vec<EvaluationRecord>,
    #[serde(default)]
    pub best_theta: Option<PolicyParams>,
}

pub fn surrogate_norms(surrogate: &[f64], truth: &[f64]) -> (f64, f64) {
    let n = surrogate.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (s, t) in surrogate.iter().zip(truth) {
        let d = s - t;
        abs += d.abs();
        sq += d * d;
    }
    (abs / n, (sq / n).sqrt())
}

impl SurfaceGrid {
    /// Assemble a grid from precomputed means, deriving levels and norms.
    pub fn from_means(
        param_box: ParamBox,
        resolution: Vec<usize>,
        points: Vec<PolicyParams>,
        surrogate_mean: Vec<f64>,
        truth: Option<Vec<f64>>,
    ) -> Result<Self> {
        if points.len() != surrogate_mean.len() {
            return Err(Error::argument("one surrogate mean per grid point is required"));
        }
        if let Some(t) = &truth {
            if t.len() != points.len() {
                return Err(Error::argument("one truth value per grid point is required"));
            }
        }
        let levels = surrogate_mean.iter().map(|m| level_of(*m)).collect();
        let (l1, l2) = match &truth {
            Some(t) => {
                let (a, b) = surrogate_norms(&surrogate_mean, t);
                (Some(a), Some(b))
            }
            None => (None, None),
        };
        Ok(SurfaceGrid {
            param_box,
            resolution,
            points,
            surrogate_mean,
            truth,
            levels,
            l1,
            l2,
            kernel: None,
            evaluated: Vec::new(),
            best_theta: None,
        })
    }

    pub fn distinct_levels(&self) -> Vec<i64> {
        let mut l = self.levels.clone();
        l.sort_unstable();
        l.dedup();
        l
    }
}

/// Fit a fresh Matérn + white-noise GP to evaluation records (on the value
/// scale) and evaluate its predictive mean over the grid. `truth`, when
/// given, is evaluated at every grid point and used for the norms.
pub fn characterize_policy_class(
    records: &[EvaluationRecord],
    param_box: &ParamBox,
    resolution: &[usize],
    tune: &TuneConfig,
    truth: Option<&dyn Fn(&PolicyParams) -> f64>,
) -> Result<SurfaceGrid> {
    if records.len() < 10 {
        return Err(Error::argument(format!(
            "characterization needs at least 10 evaluation records, got {}",
            records.len()
        )));
    }
    let inputs: Vec<PolicyParams> = records.iter().map(|r| r.theta.clone()).collect();
    let targets: Vec<f64> = records.iter().map(|r| r.value).collect();
    let model = fit_tuned(inputs, targets, None, tune, None)?;
    let points = enumerate_grid(param_box, resolution)?;
    let means = points
        .iter()
        .map(|p| model.predict_mean(p.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    let truth_vals = truth.map(|f| points.iter().map(f).collect::<Vec<_>>());
    let mut grid = SurfaceGrid::from_means(param_box.clone(), resolution.to_vec(), points, means, truth_vals)?;
    grid.kernel = Some(model.kernel().clone());
    grid.evaluated = records.to_vec();
    grid.best_theta = crate::bayesopt::OptimizationTrace::from_records(records.to_vec())
        .best_theta
        .into();
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub names: Vec<String>,
    pub resolution: Vec<usize>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub kernel: Option<KernelSpec>,
    pub level_width: f64,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Write the grid as CSV (`theta1, theta2, ..., surrogate_mean, truth, level`)
/// plus a JSON sidecar with the norms. Floats use 17 significant digits.
pub fn export_grid(grid: &SurfaceGrid, path: &Path) -> Result<()> {
    let dim = grid.param_box.dim();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=dim).map(|i| format!("theta{i}")).collect();
    header.extend(["surrogate_mean", "truth", "level"].map(String::from));
    w.write_record(&header)?;
    for (i, p) in grid.points.iter().enumerate() {
        let mut row: Vec<String> = p.0.iter().map(|v| fmt_f64(*v)).collect();
        row.push(fmt_f64(grid.surrogate_mean[i]));
        row.push(grid.truth.as_ref().map_or(String::new(), |t| fmt_f64(t[i])));
        row.push(grid.levels[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    let side = GridSidecar {
        names: grid.param_box.names.clone(),
        resolution: grid.resolution.clone(),
        l1: grid.l1,
        l2: grid.l2,
        kernel: grid.kernel.clone(),
        level_width: LEVEL_WIDTH,
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)? + "\n")?;
    Ok(())
}

/// Rows of an exported grid: `(theta, surrogate_mean, truth, level)`.
pub type GridRow = (Vec<f64>, f64, Option<f64>, i64);

pub fn read_grid_csv(path: &Path) -> Result<Vec<GridRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let dim = header.iter().filter(|h| h.starts_with("theta")).count();
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::argument(format!("bad number `{s}` in grid CSV")))
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let theta = (0..dim).map(|i| num(&rec[i])).collect::<Result<Vec<_>>>()?;
        let mean = num(&rec[dim])?;
        let truth = if rec[dim + 1].is_empty() {
            None
        } else {
            Some(num(&rec[dim + 1])?)
        };
        let level = rec[dim + 2]
            .parse::<i64>()
            .map_err(|_| Error::argument("bad level in grid CSV"))?;
        out.push((theta, mean, truth, level));
    }
    Ok(out)
}
