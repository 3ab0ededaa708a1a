//! Adaptive random-walk Metropolis with multi-chain diagnostics.
//!
//! Each chain starts from an overdispersed point around the posterior mode
//! and proposes Gaussian steps shaped by a covariance that is first taken
//! from a Laplace approximation, then re-estimated from the chain's own
//! history during burn-in. A global step scale is tuned toward the target
//! acceptance rate during burn-in. Adaptation stops at the end of burn-in.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{nelder_mead, NelderMeadOptions};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub chains: usize,
    /// Iterations per chain, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub target_acceptance: f64,
    pub max_rhat: f64,
    pub min_ess: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            chains: 4,
            iterations: 5000,
            burn_in: 2500,
            target_acceptance: 0.234,
            max_rhat: 1.05,
            min_ess: 100.0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains < 2 {
            return Err(Error::argument("at least two chains are needed for R-hat"));
        }
        if self.burn_in >= self.iterations || self.iterations - self.burn_in < 4 {
            return Err(Error::argument("iterations must exceed burn-in by at least 4"));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::argument("target acceptance must lie in (0,1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub parameters: Vec<String>,
    pub rhat: Vec<f64>,
    pub ess: Vec<f64>,
    /// Post-burn-in acceptance rate per chain.
    pub acceptance: Vec<f64>,
    pub draws_per_chain: usize,
    /// Thresholds the draws were judged against.
    pub rhat_threshold: f64,
    pub ess_threshold: f64,
    pub converged: bool,
}

impl Diagnostics {
    /// Largest split R-hat over all parameters.
    pub fn worst_rhat(&self) -> f64 {
        self.rhat.iter().cloned().fold(f64::NAN, f64::max)
    }

    /// Smallest effective sample size over all parameters.
    pub fn worst_ess(&self) -> f64 {
        self.ess.iter().cloned().fold(f64::NAN, f64::min)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Worst offending parameters, for error messages.
    pub fn summary(&self) -> String {
        let worst_r = self
            .rhat
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, r)| format!("max R-hat {r:.4} ({})", self.parameters[i]))
            .unwrap_or_default();
        let worst_e = self
            .ess
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, e)| format!("min ESS {e:.1} ({})", self.parameters[i]))
            .unwrap_or_default();
        format!("{worst_r}, {worst_e}")
    }
}

/// Post-burn-in draws, `draws[chain][iteration][parameter]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chains {
    pub draws: Vec<Vec<Vec<f64>>>,
    pub diagnostics: Diagnostics,
}

impl Chains {
    /// All draws pooled chain by chain.
    pub fn pooled(&self) -> Vec<Vec<f64>> {
        self.draws.iter().flatten().cloned().collect()
    }

    /// Error out unless every parameter meets the R-hat and ESS thresholds.
    pub fn require_convergence(self) -> Result<Self> {
        if self.diagnostics.converged {
            Ok(self)
        } else {
            Err(Error::Convergence {
                summary: self.diagnostics.summary(),
                diagnostics: Box::new(self.diagnostics),
            })
        }
    }
}

fn column(chain: &[Vec<f64>], k: usize) -> Vec<f64> {
    chain.iter().map(|d| d[k]).collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Split R-hat: every chain is halved, then the classic between/within
/// variance ratio is computed over the halves.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let mut halves: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let h = c.len() / 2;
        halves.push(&c[..h]);
        halves.push(&c[c.len() - h..]);
    }
    let n = halves[0].len() as f64;
    let m = halves.len() as f64;
    let stats: Vec<(f64, f64)> = halves.iter().map(|h| mean_var(h)).collect();
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let b = n / (m - 1.0) * stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m;
    if w <= 0.0 {
        return if b <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

fn autocovariance(xs: &[f64], mean: f64, lag: usize) -> f64 {
    let n = xs.len();
    (0..n - lag).map(|t| (xs[t] - mean) * (xs[t + lag] - mean)).sum::<f64>() / n as f64
}

/// Multi-chain effective sample size with Geyer's initial monotone positive
/// sequence truncation.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len();
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c)).collect();
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m;
    let b_over_n = stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>() / (m - 1.0);
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;
    let total = m * n as f64;
    if var_plus <= 0.0 {
        return total;
    }
    let rho = |lag: usize| -> f64 {
        let acov: f64 = chains
            .iter()
            .zip(&stats)
            .map(|(c, s)| autocovariance(c, s.0, lag))
            .sum::<f64>()
            / m;
        1.0 - (w - acov) / var_plus
    };
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let pair = if t == 0 { 1.0 + rho(1) } else { rho(t) + rho(t + 1) };
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        t += 2;
    }
    (total / tau.max(1.0 / total.log10())).min(total * total.log10())
}

pub fn diagnose(draws: &[Vec<Vec<f64>>], names: &[String], acceptance: Vec<f64>, cfg: &McmcConfig) -> Diagnostics {
    let p = names.len();
    let mut rhat = Vec::with_capacity(p);
    let mut ess = Vec::with_capacity(p);
    for k in 0..p {
        let cols: Vec<Vec<f64>> = draws.iter().map(|c| column(c, k)).collect();
        rhat.push(split_rhat(&cols));
        ess.push(effective_sample_size(&cols));
    }
    let converged = rhat.iter().all(|r| *r <= cfg.max_rhat) && ess.iter().all(|e| *e >= cfg.min_ess);
    Diagnostics {
        parameters: names.to_vec(),
        rhat,
        ess,
        acceptance,
        draws_per_chain: draws.first().map_or(0, Vec::len),
        rhat_threshold: cfg.max_rhat,
        ess_threshold: cfg.min_ess,
        converged,
    }
}

/// Posterior mode by repeated bounded simplex searches.
pub fn find_mode<F>(log_post: &F, init: &[f64], bound: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let d = init.len();
    let lower = vec![-bound; d];
    let upper = vec![bound; d];
    let opts = NelderMeadOptions {
        max_evals: 400 * d,
        f_tol: 1e-12,
        x_tol: 1e-9,
    };
    let mut x = init.to_vec();
    let mut best = f64::INFINITY;
    for round in 0..6 {
        let step = vec![if round == 0 { 0.5 } else { 0.05 }; d];
        let r = nelder_mead(|t| -log_post(t), &x, &step, &lower, &upper, opts);
        let improved = best - r.f;
        x = r.x;
        best = best.min(r.f);
        if round > 0 && improved.abs() < 1e-9 {
            break;
        }
    }
    x
}

/// Inverse negative Hessian at `x` by central differences, or `None` when it
/// is not positive definite.
pub fn laplace_covariance<F>(log_post: &F, x: &[f64]) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let d = x.len();
    let h = 1e-4;
    let f0 = log_post(x);
    let mut hess = DMatrix::zeros(d, d);
    let mut probe = x.to_vec();
    for i in 0..d {
        for j in i..d {
            let val = if i == j {
                probe[i] = x[i] + h;
                let fp = log_post(&probe);
                probe[i] = x[i] - h;
                let fm = log_post(&probe);
                probe[i] = x[i];
                (fp - 2.0 * f0 + fm) / (h * h)
            } else {
                let mut eval = |si: f64, sj: f64| {
                    probe[i] = x[i] + si * h;
                    probe[j] = x[j] + sj * h;
                    let v = log_post(&probe);
                    probe[i] = x[i];
                    probe[j] = x[j];
                    v
                };
                (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h * h)
            };
            hess[(i, j)] = -val;
            hess[(j, i)] = -val;
        }
    }
    if hess.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = hess.cholesky()?;
    Some(chol.inverse())
}

fn cholesky_or_diag(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.nrows();
    let reg = cov + DMatrix::identity(d, d) * 1e-10 * (cov.trace() / d as f64).max(1e-12);
    match reg.clone().cholesky() {
        Some(c) => c.l(),
        None => DMatrix::from_diagonal(&DVector::from_iterator(d, (0..d).map(|i| reg[(i, i)].abs().sqrt().max(1e-6)))),
    }
}

fn sample_cov(history: &[Vec<f64>]) -> DMatrix<f64> {
    let d = history[0].len();
    let n = history.len() as f64;
    let mut m = DVector::zeros(d);
    for h in history {
        m += DVector::from_column_slice(h);
    }
    m /= n;
    let mut c = DMatrix::zeros(d, d);
    for h in history {
        let v = DVector::from_column_slice(h) - &m;
        c += &v * v.transpose();
    }
    c / (n - 1.0)
}

fn run_chain<F>(log_post: &F, start: Vec<f64>, init_cov: &DMatrix<f64>, cfg: &McmcConfig, seed: u64) -> (Vec<Vec<f64>>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let d = start.len();
    let mut r = rng::stream(seed);
    let mut chol = cholesky_or_diag(init_cov);
    let mut log_scale = (2.38 / (d as f64).sqrt()).ln();
    let mut x = start;
    let mut lp = log_post(&x);
    let mut history: Vec<Vec<f64>> = Vec::with_capacity(cfg.burn_in);
    let mut kept = Vec::with_capacity(cfg.iterations - cfg.burn_in);
    let mut accepted_after = 0usize;
    let adapt_start = (cfg.burn_in / 5).max(2 * d + 2);
    for it in 0..cfg.iterations {
        let z: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
        let step = &chol * DVector::from_vec(z) * log_scale.exp();
        let prop: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let lp_prop = log_post(&prop);
        let log_alpha = if lp_prop.is_finite() { (lp_prop - lp).min(0.0) } else { f64::NEG_INFINITY };
        let u: f64 = r.random();
        let accept = u.ln() < log_alpha;
        if accept {
            x = prop;
            lp = lp_prop;
        }
        if it < cfg.burn_in {
            let gain = 1.0 / ((it + 1) as f64).powf(0.6);
            log_scale += gain * (log_alpha.exp() - cfg.target_acceptance);
            history.push(x.clone());
            if it >= adapt_start && (it + 1) % 100 == 0 {
                let recent = &history[history.len() / 2..];
                if recent.len() > 2 * d {
                    let cov = sample_cov(recent);
                    if cov.trace() > 0.0 {
                        chol = cholesky_or_diag(&cov);
                    }
                }
            }
        } else {
            accepted_after += accept as usize;
            kept.push(x.clone());
        }
    }
    let rate = accepted_after as f64 / (cfg.iterations - cfg.burn_in) as f64;
    (kept, rate)
}

/// Sample a log posterior. `init` seeds the mode search; chains are started
/// around the mode. Returns draws and diagnostics without enforcing
/// convergence (see [`Chains::require_convergence`]).
pub fn sample<F>(log_post: F, names: Vec<String>, init: &[f64], cfg: &McmcConfig, seed: u64) -> Result<Chains>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    if names.len() != init.len() {
        return Err(Error::argument("one name per parameter is required"));
    }
    if !log_post(init).is_finite() {
        return Err(Error::numerical("log posterior is not finite at the initial point"));
    }
    let d = init.len();
    let mode = find_mode(&log_post, init, 60.0);
    let cov = laplace_covariance(&log_post, &mode).unwrap_or_else(|| DMatrix::identity(d, d) * 0.01);
    let start_chol = cholesky_or_diag(&cov);
    let results: Vec<(Vec<Vec<f64>>, f64)> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(rng::derive(seed, 40, c as u64));
            // overdispersed start, retried until the density is finite
            let mut start = mode.clone();
            for _ in 0..50 {
                let z: Vec<f64> = (0..d).map(|_| r.sample::<f64, _>(StandardNormal) * 2.0).collect();
                let cand: Vec<f64> = mode
                    .iter()
                    .zip((&start_chol * DVector::from_vec(z)).iter())
                    .map(|(m, s)| m + s)
                    .collect();
                if log_post(&cand).is_finite() {
                    start = cand;
                    break;
                }
            }
            run_chain(&log_post, start, &cov, cfg, rng::derive(seed, 41, c as u64))
        })
        .collect();
    let acceptance = results.iter().map(|r| r.1).collect();
    let draws: Vec<Vec<Vec<f64>>> = results.into_iter().map(|r| r.0).collect();
    let diagnostics = diagnose(&draws, &names, acceptance, cfg);
    Ok(Chains { draws, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rhat_near_one_for_iid_and_large_for_shifted() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let iid: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..1000).map(|_| r.sample(StandardNormal)).collect())
            .collect();
        let rh = split_rhat(&iid);
        assert!((rh - 1.0).abs() < 0.01, "{rh}");
        let ess = effective_sample_size(&iid);
        assert!(ess > 3000.0 && ess < 5500.0, "{ess}");
        let mut shifted = iid.clone();
        for v in shifted[0].iter_mut() {
            *v += 3.0;
        }
        assert!(split_rhat(&shifted) > 1.2);
    }

    #[test]
    fn ess_small_for_autocorrelated_chain() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..2000)
                    .map(|_| {
                        let e: f64 = r.sample(StandardNormal);
                        x = 0.95 * x + e;
                        x
                    })
                    .collect()
            })
            .collect();
        // AR(1) with phi = 0.95: tau = (1 + phi) / (1 - phi) = 39
        let ess = effective_sample_size(&chains);
        assert!(ess > 100.0 && ess < 400.0, "{ess}");
    }

    #[test]
    fn correlated_gaussian_target() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
        let prec = cov.clone().try_inverse().unwrap();
        let lp = move |x: &[f64]| {
            let v = DVector::from_column_slice(x) - DVector::from_column_slice(&[1.0, -2.0]);
            -0.5 * (v.transpose() * &prec * &v)[(0, 0)]
        };
        let cfg = McmcConfig::default();
        let ch = sample(&lp, vec!["a".into(), "b".into()], &[0.0, 0.0], &cfg, 3).unwrap();
        assert!(ch.diagnostics.converged, "{:?}", ch.diagnostics);
        let pooled = ch.pooled();
        let ma = pooled.iter().map(|d| d[0]).sum::<f64>() / pooled.len() as f64;
        let mb = pooled.iter().map(|d| d[1]).sum::<f64>() / pooled.len() as f64;
        assert!((ma - 1.0).abs() < 0.1 && (mb + 2.0).abs() < 0.1);
        for a in &ch.diagnostics.acceptance {
            assert!(*a > 0.1 && *a < 0.5, "{a}");
        }
        let again = sample(&lp, vec!["a".into(), "b".into()], &[0.0, 0.0], &cfg, 3).unwrap();
        assert_eq!(ch, again);
    }

    #[test]
    fn non_convergence_is_an_error() {
        let d = Diagnostics {
            parameters: vec!["a".into()],
            rhat: vec![1.3],
            ess: vec![20.0],
            acceptance: vec![0.2],
            draws_per_chain: 10,
            rhat_threshold: 1.05,
            ess_threshold: 100.0,
            converged: false,
        };
        let ch = Chains { draws: vec![], diagnostics: d };
        match ch.require_convergence() {
            Err(Error::Convergence { diagnostics, .. }) => assert_eq!(diagnostics.rhat, vec![1.3]),
            other => panic!("{other:?}"),
        }
    }
}
