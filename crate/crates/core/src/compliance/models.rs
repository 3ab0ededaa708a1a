use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::design::{history_features, outcome_features, Design, Feature, Inputs};
use super::mcmc::{sample, Diagnostics, McmcConfig};
use super::{ComplianceDataset, ComplianceTrajectory};
use crate::config::fmt_f64;
use crate::error::{Error, Result};
use crate::numeric::{log_norm_interval, logistic, quantile_sorted, softplus, std_trunc_norm_from_uniform, LN_SQRT_2PI};
use crate::rng;

/// Prior variance of every compliance-model coefficient.
pub const COMPLIANCE_PRIOR_VARIANCE: f64 = 3.0;
/// Half-Cauchy scale of the compliance noise prior.
pub const SIGMA_PRIOR_SCALE: f64 = 5.0;
/// Default prior variance of every outcome-model coefficient.
pub const OUTCOME_PRIOR_VARIANCE: f64 = 3.0;
/// Support of `log sigma` explored by the sampler.
pub const LOG_SIGMA_RANGE: (f64, f64) = (-12.0, 5.0);
/// A standardized coefficient whose 95% interval reaches this magnitude
/// suggests (quasi-)separation.
pub const SEPARATION_LIMIT: f64 = 20.0;

pub(crate) fn history_inputs(r: &ComplianceTrajectory, c1: f64, a1: f64) -> Inputs<'_> {
    Inputs {
        x0: &r.x0,
        c0: r.c0,
        x1: &r.x1,
        c1,
        a1,
    }
}

fn write_draws(path: &Path, labels: &[String], draws: &[Vec<f64>], per_chain: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["chain".to_string(), "iteration".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header)?;
    for (i, d) in draws.iter().enumerate() {
        let mut row = vec![(i / per_chain.max(1)).to_string(), (i % per_chain.max(1)).to_string()];
        row.extend(d.iter().map(|v| fmt_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Posterior of the `[0,1]`-truncated normal model for `C1(0)` given history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncNormPosterior {
    pub design: Design,
    pub labels: Vec<String>,
    /// Coefficients on the standardized design, one vector per draw.
    pub beta: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl TruncNormPosterior {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn location(&self, draw: usize, r: &ComplianceTrajectory) -> f64 {
        self.design.dot(&history_inputs(r, 0.0, 0.0), &self.beta[draw])
    }

    /// `C1(0)` for draw `draw` of the parameters and uniform `u`.
    pub fn c1_from_uniform(&self, draw: usize, r: &ComplianceTrajectory, u: f64) -> f64 {
        trunc_unit_from_uniform(self.location(draw, r), self.sigma[draw], u)
    }

    pub fn write_draws_csv(&self, path: &Path) -> Result<()> {
        let mut labels = self.labels.clone();
        labels.push("sigma".into());
        let rows: Vec<Vec<f64>> = self
            .beta
            .iter()
            .zip(&self.sigma)
            .map(|(b, s)| b.iter().copied().chain([*s]).collect())
            .collect();
        write_draws(path, &labels, &rows, self.diagnostics.draws_per_chain)
    }
}

/// Draw from `N(mu, sigma^2)` restricted to `[0,1]` by inverse CDF.
pub fn trunc_unit_from_uniform(mu: f64, sigma: f64, u: f64) -> f64 {
    if sigma <= 0.0 {
        return mu.clamp(0.0, 1.0);
    }
    let a = (0.0 - mu) / sigma;
    let b = (1.0 - mu) / sigma;
    (mu + sigma * std_trunc_norm_from_uniform(a, b, u)).clamp(0.0, 1.0)
}

/// Analytic CDF of `N(mu, sigma^2)` truncated to `[0,1]`.
pub fn trunc_unit_cdf(mu: f64, sigma: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = -mu / sigma;
    let b = (1.0 - mu) / sigma;
    (log_norm_interval(a, (x - mu) / sigma) - log_norm_interval(a, b)).exp()
}

fn trunc_loglik(mu: f64, sigma: f64, log_sigma: f64, c: f64) -> f64 {
    let z = (c - mu) / sigma;
    -0.5 * z * z - log_sigma - LN_SQRT_2PI - log_norm_interval(-mu / sigma, (1.0 - mu) / sigma)
}

/// Fit the compliance model on records with `a1 = 0`. `features` defaults
/// to `{1, x0..., c0, x1...}`.
pub fn fit_compliance_model(
    data: &ComplianceDataset,
    features: Option<Vec<Feature>>,
    cfg: &McmcConfig,
    seed: u64,
) -> Result<TruncNormPosterior> {
    let untreated: Vec<&ComplianceTrajectory> = data.records.iter().filter(|r| r.a1 == 0).collect();
    if untreated.len() < 30 {
        return Err(Error::argument(format!(
            "the compliance model needs at least 30 records with a1 = 0, got {}",
            untreated.len()
        )));
    }
    let features = features.unwrap_or_else(|| history_features(data));
    if features.iter().any(|f| matches!(f, Feature::C1 | Feature::A1 | Feature::A1C1)) {
        return Err(Error::argument("compliance features may only use baseline and interim history"));
    }
    let design = Design::fit(features, untreated.iter().map(|r| history_inputs(r, 0.0, 0.0)))?;
    let rows: Vec<Vec<f64>> = untreated.iter().map(|r| design.row(&history_inputs(r, 0.0, 0.0))).collect();
    let c: Vec<f64> = untreated.iter().map(|r| r.realized_c1()).collect();
    let p = design.dim();
    let log_post = |theta: &[f64]| -> f64 {
        let log_sigma = theta[p];
        if !(LOG_SIGMA_RANGE.0..=LOG_SIGMA_RANGE.1).contains(&log_sigma) {
            return f64::NEG_INFINITY;
        }
        let sigma = log_sigma.exp();
        let beta = &theta[..p];
        let mut lp = -beta.iter().map(|b| b * b).sum::<f64>() / (2.0 * COMPLIANCE_PRIOR_VARIANCE);
        lp += -(1.0 + (sigma / SIGMA_PRIOR_SCALE).powi(2)).ln() + log_sigma;
        for (x, ci) in rows.iter().zip(&c) {
            let mu: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
            lp += trunc_loglik(mu, sigma, log_sigma, *ci);
        }
        lp
    };
    let mut init = vec![0.0; p + 1];
    if let Some(k) = design.features.iter().position(|f| *f == Feature::Intercept) {
        init[k] = crate::numeric::mean(&c);
    }
    init[p] = crate::numeric::sample_sd(&c).max(1e-3).ln();
    let labels = design.labels(data);
    let mut names = labels.clone();
    names.push("log_sigma".into());
    let chains = sample(log_post, names, &init, cfg, seed)?.require_convergence()?;
    let pooled = chains.pooled();
    Ok(TruncNormPosterior {
        beta: pooled.iter().map(|d| d[..p].to_vec()).collect(),
        sigma: pooled.iter().map(|d| d[p].exp()).collect(),
        design,
        labels,
        diagnostics: chains.diagnostics,
    })
}

/// One posterior-predictive draw of `C1(0)` for a treated record.
pub fn impute_c1(posterior: &TruncNormPosterior, record: &ComplianceTrajectory, seed: u64) -> Result<f64> {
    if record.a1 != 1 {
        return Err(Error::argument("imputation applies to records with a1 = 1; use the observed c1"));
    }
    if posterior.is_empty() {
        return Err(Error::argument("posterior has no draws"));
    }
    let mut r = rng::stream(seed);
    let draw = r.random_range(0..posterior.len());
    Ok(posterior.c1_from_uniform(draw, record, r.random()))
}

/// Posterior of the Bernoulli-logit outcome model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitPosterior {
    pub design: Design,
    pub labels: Vec<String>,
    pub beta: Vec<Vec<f64>>,
    /// Prior variances (diagonal of the prior covariance).
    pub prior_scale: Vec<f64>,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

impl LogitPosterior {
    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn probability(&self, draw: usize, r: &ComplianceTrajectory, c1: f64, a1: u8) -> f64 {
        logistic(self.design.dot(&history_inputs(r, c1, a1 as f64), &self.beta[draw]))
    }

    pub fn write_draws_csv(&self, path: &Path) -> Result<()> {
        write_draws(path, &self.labels, &self.beta, self.diagnostics.draws_per_chain)
    }

    /// Central 95% interval of one coefficient.
    pub fn interval(&self, k: usize) -> (f64, f64) {
        let mut v: Vec<f64> = self.beta.iter().map(|b| b[k]).collect();
        v.sort_by(f64::total_cmp);
        (quantile_sorted(&v, 0.025), quantile_sorted(&v, 0.975))
    }
}

/// Fit the outcome model on completed data: every record's realized `c1`
/// (observed, or 1 under treatment). `features` defaults to
/// `{1, x0..., c0, x1..., c1, a1}`; `prior_scale` to 3 per coefficient.
pub fn fit_outcome_model_bayes(
    data: &ComplianceDataset,
    features: Option<Vec<Feature>>,
    prior_scale: Option<Vec<f64>>,
    cfg: &McmcConfig,
    seed: u64,
) -> Result<LogitPosterior> {
    let ones = data.records.iter().filter(|r| r.y == 1).count();
    if ones == 0 || ones == data.len() {
        return Err(Error::argument("the outcome model needs both outcome classes"));
    }
    let features = features.unwrap_or_else(|| outcome_features(data));
    let inputs = |r: &ComplianceTrajectory| (r.realized_c1(), r.a1 as f64);
    let design = Design::fit(
        features,
        data.records.iter().map(|r| {
            let (c1, a1) = inputs(r);
            history_inputs(r, c1, a1)
        }),
    )?;
    let p = design.dim();
    let prior_scale = prior_scale.unwrap_or_else(|| vec![OUTCOME_PRIOR_VARIANCE; p]);
    if prior_scale.len() != p || prior_scale.iter().any(|s| s.is_nan() || *s <= 0.0) {
        return Err(Error::argument("prior scale must hold one positive value per coefficient"));
    }
    let rows: Vec<Vec<f64>> = data
        .records
        .iter()
        .map(|r| {
            let (c1, a1) = inputs(r);
            design.row(&history_inputs(r, c1, a1))
        })
        .collect();
    let y: Vec<f64> = data.records.iter().map(|r| r.y as f64).collect();
    let log_post = |beta: &[f64]| -> f64 {
        let mut lp = -beta
            .iter()
            .zip(&prior_scale)
            .map(|(b, s)| b * b / (2.0 * s))
            .sum::<f64>();
        for (x, yi) in rows.iter().zip(&y) {
            let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
            lp += yi * eta - softplus(eta);
        }
        lp
    };
    let mut init = vec![0.0; p];
    if let Some(k) = design.features.iter().position(|f| *f == Feature::Intercept) {
        let m = ones as f64 / data.len() as f64;
        init[k] = (m / (1.0 - m)).ln();
    }
    let labels = design.labels(data);
    let chains = sample(log_post, labels.clone(), &init, cfg, seed)?.require_convergence()?;
    let mut post = LogitPosterior {
        beta: chains.pooled(),
        design,
        labels,
        prior_scale,
        diagnostics: chains.diagnostics,
        warnings: Vec::new(),
    };
    for k in 0..p {
        let (lo, hi) = post.interval(k);
        if lo <= -SEPARATION_LIMIT || hi >= SEPARATION_LIMIT {
            post.warnings.push(format!(
                "coefficient `{}` has 95% interval [{lo:.2}, {hi:.2}]; the data may be separated",
                post.labels[k]
            ));
        }
    }
    Ok(post)
}
