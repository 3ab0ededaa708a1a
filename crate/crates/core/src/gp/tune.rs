use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{KernelSpec, Smoothness};
use super::model::{check_inputs, factor_with_jitter, lml_from_factor};
use crate::error::{Error, Result};
use crate::numeric::{latin_hypercube, nelder_mead, NelderMeadOptions};
use crate::policy::PolicyParams;

/// Marginal-likelihood search settings. All bounds are on natural logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneConfig {
    pub nu: Smoothness,
    pub restarts: usize,
    pub max_evals_per_restart: usize,
    pub log_lengthscale_bounds: (f64, f64),
    pub log_signal_variance_bounds: (f64, f64),
    pub log_noise_bounds: (f64, f64),
    /// Subtract the target mean before evaluating the evidence.
    pub center: bool,
    pub seed: u64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            nu: Smoothness::ThreeHalves,
            restarts: 8,
            max_evals_per_restart: 300,
            log_lengthscale_bounds: (-5.0, 7.0),
            log_signal_variance_bounds: (-7.0, 4.0),
            log_noise_bounds: (-12.0, 2.0),
            center: true,
            seed: 0,
        }
    }
}

/// Precomputed pairwise squared coordinate differences, one matrix per
/// dimension, so each evidence evaluation only rescales and sums.
struct Evidence<'a> {
    n: usize,
    dim: usize,
    sq_diffs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    per_point_noise: Option<&'a [f64]>,
    nu: Smoothness,
}

impl<'a> Evidence<'a> {
    fn new(
        inputs: &[PolicyParams],
        targets: &[f64],
        per_point_noise: Option<&'a [f64]>,
        nu: Smoothness,
        center: bool,
    ) -> Self {
        let n = inputs.len();
        let dim = inputs[0].dim();
        let sq_diffs = (0..dim)
            .map(|d| {
                let mut m = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..i {
                        let diff = inputs[i].0[d] - inputs[j].0[d];
                        m[i * n + j] = diff * diff;
                    }
                }
                m
            })
            .collect();
        let offset = if center {
            targets.iter().sum::<f64>() / n as f64
        } else {
            0.0
        };
        Evidence {
            n,
            dim,
            sq_diffs,
            targets: targets.iter().map(|t| t - offset).collect(),
            per_point_noise,
            nu,
        }
    }

    /// Layout: [log sigma^2, log l_1..log l_d, log noise].
    fn kernel_from(&self, x: &[f64]) -> KernelSpec {
        KernelSpec {
            nu: self.nu,
            signal_variance: x[0].exp(),
            lengthscales: x[1..=self.dim].iter().map(|v| v.exp()).collect(),
            noise_variance: x[self.dim + 1].exp(),
        }
    }

    fn log_evidence(&self, x: &[f64]) -> Option<f64> {
        let s2 = x[0].exp();
        let inv_l2: Vec<f64> = x[1..=self.dim].iter().map(|v| (-2.0 * v).exp()).collect();
        let noise = x[self.dim + 1].exp();
        let n = self.n;
        let mut gram = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..i {
                let r2: f64 = (0..self.dim)
                    .map(|d| self.sq_diffs[d][i * n + j] * inv_l2[d])
                    .sum();
                let v = s2 * self.nu.correlation(r2.sqrt());
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
            gram[(i, i)] = s2 + noise + self.per_point_noise.map_or(0.0, |p| p[i]);
        }
        let (l, _) = factor_with_jitter(&gram).ok()?;
        let v = lml_from_factor(&l, &self.targets);
        v.is_finite().then_some(v)
    }
}

/// Maximize the log marginal likelihood over log-parameterized
/// (signal variance, lengthscales, noise) with multi-start Nelder-Mead.
/// Starts come from a Latin hypercube over the bounds; an optional warm
/// start replaces the first of them.
pub fn tune_hyperparameters(
    inputs: &[PolicyParams],
    targets: &[f64],
    per_point_noise: Option<&[f64]>,
    config: &TuneConfig,
) -> Result<KernelSpec> {
    tune_with_warm_start(inputs, targets, per_point_noise, config, None)
}

pub fn tune_with_warm_start(
    inputs: &[PolicyParams],
    targets: &[f64],
    per_point_noise: Option<&[f64]>,
    config: &TuneConfig,
    warm_start: Option<&KernelSpec>,
) -> Result<KernelSpec> {
    if inputs.len() < 3 {
        return Err(Error::argument("hyperparameter tuning needs at least 3 pairs"));
    }
    if config.restarts == 0 {
        return Err(Error::argument("at least one restart is required"));
    }
    let dim = inputs[0].dim();
    let probe = KernelSpec {
        nu: config.nu,
        signal_variance: 1.0,
        lengthscales: vec![1.0; dim],
        noise_variance: 0.0,
    };
    check_inputs(&probe, inputs, targets, per_point_noise)?;

    let ev = Evidence::new(inputs, targets, per_point_noise, config.nu, config.center);
    let mut lower = vec![config.log_signal_variance_bounds.0];
    let mut upper = vec![config.log_signal_variance_bounds.1];
    for _ in 0..dim {
        lower.push(config.log_lengthscale_bounds.0);
        upper.push(config.log_lengthscale_bounds.1);
    }
    lower.push(config.log_noise_bounds.0);
    upper.push(config.log_noise_bounds.1);
    let width: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| u - l).collect();
    let step: Vec<f64> = width.iter().map(|w| 0.1 * w).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts: Vec<Vec<f64>> = latin_hypercube(config.restarts, lower.len(), &mut rng)
        .into_iter()
        .map(|u| u.iter().enumerate().map(|(i, ui)| lower[i] + ui * width[i]).collect())
        .collect();
    if let Some(w) = warm_start {
        if w.dim() == dim {
            let mut x = vec![w.signal_variance.ln()];
            x.extend(w.lengthscales.iter().map(|l| l.ln()));
            x.push(w.noise_variance.max(1e-300).ln());
            for i in 0..x.len() {
                x[i] = x[i].clamp(lower[i], upper[i]);
            }
            starts[0] = x;
        }
    }

    let opts = NelderMeadOptions {
        max_evals: config.max_evals_per_restart,
        f_tol: 1e-8,
        x_tol: 1e-6,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in &starts {
        let r = nelder_mead(
            |x| ev.log_evidence(x).map_or(f64::INFINITY, |v| -v),
            s,
            &step,
            &lower,
            &upper,
            opts,
        );
        if r.f.is_finite() && best.as_ref().is_none_or(|(bf, _)| r.f < *bf) {
            best = Some((r.f, r.x));
        }
    }
    match best {
        Some((_, x)) => Ok(ev.kernel_from(&x)),
        None => Err(Error::numerical(
            "every tuning restart failed to produce a positive-definite Gram matrix",
        )),
    }
}
