//! Python bindings for `dtrgp`.
//!
//! Policies are passed as plain parameter lists, datasets as lists of
//! tuples and structured results as JSON strings, so the Python side needs
//! nothing beyond the standard library.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dtrgp::bayesopt::{self, Budget, GpConfig};
use dtrgp::compliance::{self, ComplianceDataset, McmcConfig, PadSpec, SimConfig};
use dtrgp::estimators::{Estimator, Trajectory};
use dtrgp::gp::{self, KernelSpec, Smoothness, TuneConfig};
use dtrgp::policy::{ParamBox, Policy, PolicyParams, ThresholdPolicy, TwoFeaturePolicy};
use dtrgp::simbench::{self, DgpSpec, StudyCell, StudyConfig};
use dtrgp::{rng, Error};

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dgp(setting: u8, w: f64, n: usize, corrected: bool) -> PyResult<DgpSpec> {
    let mut spec = DgpSpec::new(setting, w, n).map_err(to_py)?;
    spec.setting1_corrected = corrected;
    Ok(spec)
}

fn params(theta: Vec<f64>) -> PyResult<PolicyParams> {
    PolicyParams::new(theta).map_err(to_py)
}

/// Simulated single-decision dataset as `(x, a, y, propensity)` tuples.
#[pyfunction]
#[pyo3(signature = (setting, w, n, seed, corrected = false))]
fn generate_dataset(setting: u8, w: f64, n: usize, seed: u64, corrected: bool) -> PyResult<Vec<(f64, u8, f64, f64)>> {
    let data = simbench::generate_dataset(&dgp(setting, w, n, corrected)?, seed).map_err(to_py)?;
    Ok(data.into_iter().map(|t| (t.x[0], t.a, t.y, t.propensity)).collect())
}

/// True value of the threshold policy `1(x < beta1 or x > beta2)`.
#[pyfunction]
#[pyo3(signature = (setting, w, beta1, beta2, corrected = false))]
fn oracle_value(setting: u8, w: f64, beta1: f64, beta2: f64, corrected: bool) -> PyResult<f64> {
    let spec = dgp(setting, w, 1, corrected)?;
    Ok(simbench::oracle_value(&spec, &ThresholdPolicy::new(beta1, beta2)).value)
}

/// Estimated value and standard error of a threshold policy on a dataset.
///
/// `estimator` is one of `ipw`, `sipw`, `gcomp`, `aipwe`.
#[pyfunction]
fn estimate_value(estimator: &str, data: Vec<(f64, u8, f64, f64)>, beta1: f64, beta2: f64) -> PyResult<(f64, f64)> {
    let est = Estimator::parse(estimator).map_err(to_py)?;
    let data = data
        .into_iter()
        .map(|(x, a, y, p)| Trajectory::new(vec![x], a, y, p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    let v = est
        .estimate(&data, &Policy::Threshold(ThresholdPolicy::new(beta1, beta2)))
        .map_err(to_py)?;
    Ok((v.value, v.std_dev))
}

/// Expected improvement for minimization from predictive moments.
#[pyfunction]
fn expected_improvement(mu: f64, sigma: f64, f_min: f64) -> f64 {
    bayesopt::ei_from_moments(mu, sigma, f_min)
}

/// Matérn ARD Gaussian-process regression model.
#[pyclass(name = "GpModel", module = "pydtrgp")]
struct PyGpModel {
    inner: gp::GpModel,
}

#[pymethods]
impl PyGpModel {
    /// Fit with fixed hyperparameters.
    #[new]
    #[pyo3(signature = (inputs, targets, lengthscales, signal_variance = 1.0, noise_variance = 1e-6, nu = 1.5, center = false))]
    fn new(
        inputs: Vec<Vec<f64>>,
        targets: Vec<f64>,
        lengthscales: Vec<f64>,
        signal_variance: f64,
        noise_variance: f64,
        nu: f64,
        center: bool,
    ) -> PyResult<Self> {
        let nu = Smoothness::from_nu(nu).map_err(to_py)?;
        let kernel = KernelSpec::new(nu, signal_variance, lengthscales, noise_variance).map_err(to_py)?;
        let inputs = inputs.into_iter().map(params).collect::<PyResult<Vec<_>>>()?;
        let inner = gp::GpModel::fit(kernel, inputs, targets, None, center).map_err(to_py)?;
        Ok(PyGpModel { inner })
    }

    /// Fit with hyperparameters chosen by maximizing the marginal likelihood.
    #[staticmethod]
    #[pyo3(signature = (inputs, targets, seed = 0, restarts = 8, nu = 1.5))]
    fn tuned(inputs: Vec<Vec<f64>>, targets: Vec<f64>, seed: u64, restarts: usize, nu: f64) -> PyResult<Self> {
        let cfg = TuneConfig {
            nu: Smoothness::from_nu(nu).map_err(to_py)?,
            restarts,
            seed,
            ..TuneConfig::default()
        };
        let inputs = inputs.into_iter().map(params).collect::<PyResult<Vec<_>>>()?;
        let inner = gp::fit_tuned(inputs, targets, None, &cfg, None).map_err(to_py)?;
        Ok(PyGpModel { inner })
    }

    /// Predictive `(mean, variance)` at a query point.
    fn predict(&self, query: Vec<f64>) -> PyResult<(f64, f64)> {
        let p = self.inner.predict_slice(&query).map_err(to_py)?;
        Ok((p.mean, p.variance))
    }

    fn log_marginal_likelihood(&self) -> f64 {
        self.inner.log_marginal_likelihood()
    }

    #[getter]
    fn lengthscales(&self) -> Vec<f64> {
        self.inner.kernel().lengthscales.clone()
    }

    #[getter]
    fn signal_variance(&self) -> f64 {
        self.inner.kernel().signal_variance
    }

    #[getter]
    fn noise_variance(&self) -> f64 {
        self.inner.kernel().noise_variance
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyGpModel {
            inner: gp::GpModel::from_json(text).map_err(to_py)?,
        })
    }

    fn __repr__(&self) -> String {
        let k = self.inner.kernel();
        format!(
            "GpModel(n={}, lengthscales={:?}, signal_variance={}, noise_variance={})",
            self.inner.len(),
            k.lengthscales,
            k.signal_variance,
            k.noise_variance
        )
    }
}

/// Maximize a Python callable over a box by expected improvement.
///
/// `evaluator(theta)` returns `(value, std_dev)`. Returns the optimization
/// trace as JSON.
#[pyfunction]
#[pyo3(signature = (evaluator, lower, upper, n_initial = 50, n_ei = 50, seed = 0))]
fn optimize_policy(
    evaluator: Bound<'_, PyAny>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    n_initial: usize,
    n_ei: usize,
    seed: u64,
) -> PyResult<String> {
    let names = (0..lower.len()).map(|i| format!("theta{}", i + 1)).collect();
    let bx = ParamBox::new(lower, upper, names).map_err(to_py)?;
    let budget = Budget {
        n_initial,
        n_ei,
        ..Budget::default()
    };
    let mut py_error: Option<PyErr> = None;
    let result = bayesopt::optimize_policy(
        |theta| match evaluator.call1((theta.0.clone(),)).and_then(|r| r.extract::<(f64, f64)>()) {
            Ok(v) => Ok(v),
            Err(e) => {
                let msg = e.to_string();
                py_error = Some(e);
                Err(Error::Estimation(msg))
            }
        },
        &bx,
        &budget,
        &GpConfig::default(),
        seed,
    );
    match result {
        Ok(trace) => trace.to_json().map_err(to_py),
        Err(e) => Err(py_error.take().unwrap_or_else(|| to_py(e))),
    }
}

/// Run one simulation-study cell; returns the run summary as JSON.
#[pyfunction]
#[pyo3(signature = (setting, n, w, estimator, runs = 200, seed = 0, characterize = false, corrected = false))]
#[allow(clippy::too_many_arguments)]
fn run_cell(
    py: Python<'_>,
    setting: u8,
    n: usize,
    w: f64,
    estimator: &str,
    runs: usize,
    seed: u64,
    characterize: bool,
    corrected: bool,
) -> PyResult<String> {
    let cell = StudyCell {
        dgp: dgp(setting, w, n, corrected)?,
        estimator: Estimator::parse(estimator).map_err(to_py)?,
    };
    let cfg = StudyConfig {
        runs,
        seed,
        characterize,
        ..StudyConfig::default()
    };
    let summary = py.detach(|| simbench::run_cell(&cell, &cfg)).map_err(to_py)?;
    serde_json::to_string(&summary).map_err(json_err)
}

/// Partial-compliance cohort with principal ignorability built in.
#[pyclass(name = "ComplianceData", module = "pydtrgp")]
struct PyComplianceData {
    inner: ComplianceDataset,
}

#[pymethods]
impl PyComplianceData {
    /// Synthetic cohort from the default generator.
    #[staticmethod]
    fn synthetic(n: usize, seed: u64) -> PyResult<Self> {
        Ok(PyComplianceData {
            inner: compliance::generate_pad_like_data(&PadSpec::default(), n, seed).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn read_csv(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyComplianceData {
            inner: ComplianceDataset::read_csv(&path).map_err(to_py)?,
        })
    }

    fn write_csv(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.write_csv(&path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Fit both posteriors and simulate the value of the regime
    /// `1(c0 < theta1 and w0 > theta2)`. Returns the value posterior as JSON.
    #[pyo3(signature = (theta1, theta2, seed = 0, iterations = 5000, population_size = 10000, repeats = 30, n_value_draws = 100))]
    #[allow(clippy::too_many_arguments)]
    fn value(
        &self,
        py: Python<'_>,
        theta1: f64,
        theta2: f64,
        seed: u64,
        iterations: usize,
        population_size: usize,
        repeats: usize,
        n_value_draws: usize,
    ) -> PyResult<String> {
        let mcmc = McmcConfig {
            iterations,
            burn_in: iterations / 2,
            ..McmcConfig::default()
        };
        let sim = SimConfig {
            population_size,
            repeats,
            n_value_draws,
        };
        let policy = Policy::TwoFeature(TwoFeaturePolicy::new(theta1, theta2).map_err(to_py)?);
        let data = &self.inner;
        let posterior = py
            .detach(|| {
                let comp = compliance::fit_compliance_model(data, None, &mcmc, rng::derive(seed, 60, 0))?;
                let out = compliance::fit_outcome_model_bayes(data, None, None, &mcmc, rng::derive(seed, 60, 1))?;
                compliance::value_posterior(data, &policy, &comp, &out, &sim, rng::derive(seed, 61, 0))
            })
            .map_err(to_py)?;
        serde_json::to_string(&posterior).map_err(json_err)
    }
}

/// Forward-simulated value of a regime under the default generator.
#[pyfunction]
#[pyo3(signature = (theta1, theta2, samples = 1_000_000, seed = 0))]
fn compliance_oracle(theta1: f64, theta2: f64, samples: usize, seed: u64) -> PyResult<f64> {
    let policy = Policy::TwoFeature(TwoFeaturePolicy::new(theta1, theta2).map_err(to_py)?);
    compliance::forward_oracle(&PadSpec::default(), &policy, samples, seed).map_err(to_py)
}

#[pymodule]
fn pydtrgp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_value, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_value, m)?)?;
    m.add_function(wrap_pyfunction!(expected_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_policy, m)?)?;
    m.add_function(wrap_pyfunction!(run_cell, m)?)?;
    m.add_function(wrap_pyfunction!(compliance_oracle, m)?)?;
    m.add_class::<PyGpModel>()?;
    m.add_class::<PyComplianceData>()?;
    Ok(())
}
