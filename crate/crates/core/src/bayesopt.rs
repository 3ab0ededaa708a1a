//! Expected-improvement Bayesian optimization over a parameter box.
//!
//! The value function is maximized by minimizing its negation: the GP is fit
//! to `-value`, `f_min` is the smallest negated evaluation so far, and the
//! trace reports everything back on the original (un-negated) scale.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::fmt_f64;
use crate::error::{Error, Result};
use crate::gp::{tune_with_warm_start, GpModel, KernelSpec, TuneConfig};
use crate::numeric::{latin_hypercube, nelder_mead, norm_cdf, norm_pdf, shifted_halton, NelderMeadOptions};
use crate::policy::{ParamBox, PolicyParams};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    InitialDesign,
    EiStep,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::InitialDesign => "initial-design",
            Source::EiStep => "ei-step",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub theta: PolicyParams,
    pub value: f64,
    pub std_dev: f64,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub records: Vec<EvaluationRecord>,
    pub best_theta: PolicyParams,
    pub best_value: f64,
    pub budget_used: usize,
}

impl OptimizationTrace {
    /// Build a trace from records; the best record is the earliest one
    /// attaining the maximum value.
    pub fn from_records(records: Vec<EvaluationRecord>) -> Self {
        let mut best: Option<&EvaluationRecord> = None;
        for r in &records {
            if best.is_none_or(|b| r.value > b.value) {
                best = Some(r);
            }
        }
        let (best_theta, best_value) = best
            .map(|b| (b.theta.clone(), b.value))
            .unwrap_or((PolicyParams(vec![]), f64::NEG_INFINITY));
        OptimizationTrace {
            budget_used: records.len(),
            records,
            best_theta,
            best_value,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Flat CSV: `iteration, theta columns..., value, std_dev, source`.
    pub fn write_csv(&self, path: &Path, names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["iteration".to_string()];
        header.extend(names.iter().cloned());
        header.extend(["value", "std_dev", "source"].map(String::from));
        w.write_record(&header)?;
        for (i, r) in self.records.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(r.theta.0.iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(r.value));
            row.push(fmt_f64(r.std_dev));
            row.push(r.source.as_str().to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    pub n_initial: usize,
    pub n_ei: usize,
    pub ei_stop_threshold: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            n_initial: 50,
            n_ei: 50,
            ei_stop_threshold: 1e-6,
        }
    }
}

/// Surrogate settings for the optimization loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    pub tune: TuneConfig,
    /// Feed each evaluation's squared standard deviation to the GP as
    /// per-point noise, on top of the tuned white noise.
    pub per_point_noise: bool,
    /// Restarts for the retune after each EI evaluation. The first is warm
    /// started from the previous hyperparameters; the initial fit uses
    /// `tune.restarts`.
    pub retune_restarts: usize,
    pub candidates: usize,
    pub refine_top: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            tune: TuneConfig::default(),
            per_point_noise: false,
            retune_restarts: 1,
            candidates: 2048,
            refine_top: 5,
        }
    }
}

/// Latin-hypercube sample of `b` points in the box.
pub fn space_filling_design(bx: &ParamBox, b: usize, seed: u64) -> Result<Vec<PolicyParams>> {
    if b == 0 {
        return Err(Error::argument("design size must be at least 1"));
    }
    let mut r = rng::stream(seed);
    Ok(latin_hypercube(b, bx.dim(), &mut r)
        .iter()
        .map(|u| bx.from_unit(u))
        .collect())
}

/// EI for minimization from a predictive mean and standard deviation.
#[inline]
pub fn ei_from_moments(mu: f64, sigma: f64, f_min: f64) -> f64 {
    let imp = f_min - mu;
    if sigma < 1e-12 {
        return imp.max(0.0);
    }
    let z = imp / sigma;
    (imp * norm_cdf(z) + sigma * norm_pdf(z)).max(0.0)
}

pub fn expected_improvement(model: &GpModel, theta: &PolicyParams, f_min: f64) -> Result<f64> {
    let p = model.predict(theta)?;
    Ok(ei_from_moments(p.mean, p.std_dev(), f_min))
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Higher EI first, then lexicographically smaller coordinates.
fn rank(a: &(f64, Vec<f64>), b: &(f64, Vec<f64>)) -> std::cmp::Ordering {
    b.0.total_cmp(&a.0).then_with(|| lex_cmp(&a.1, &b.1))
}

/// Maximize EI over the box: score quasi-random candidates plus
/// perturbations around the training inputs, then polish the best few with
/// a bounded simplex search. Returns the maximizer and its EI.
pub fn maximize_ei(
    model: &GpModel,
    bx: &ParamBox,
    f_min: f64,
    seed: u64,
    config: &GpConfig,
) -> Result<(PolicyParams, f64)> {
    let dim = bx.dim();
    let mut r = rng::stream(seed);
    let mut cands: Vec<Vec<f64>> = shifted_halton(config.candidates, dim, &mut r)
        .iter()
        .map(|u| bx.from_unit(u).0)
        .collect();

    // Midpoints between each training input and its nearest neighbour, and a
    // small jitter around each input.
    let train = model.train_inputs();
    let scaled_dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .enumerate()
            .map(|(i, (x, y))| ((x - y) / bx.width(i)).powi(2))
            .sum()
    };
    use rand_distr::{Distribution, Normal};
    let jitter = Normal::new(0.0, 1.0).unwrap();
    for (i, ti) in train.iter().enumerate() {
        let nearest = train
            .iter()
            .enumerate()
            .filter(|(j, tj)| *j != i && scaled_dist(ti.as_slice(), tj.as_slice()) > 0.0)
            .min_by(|(_, a), (_, b)| {
                scaled_dist(ti.as_slice(), a.as_slice()).total_cmp(&scaled_dist(ti.as_slice(), b.as_slice()))
            });
        if let Some((_, tj)) = nearest {
            let mut mid: Vec<f64> = (0..dim)
                .map(|d| 0.5 * (ti.0[d] + tj.0[d]) + 0.01 * bx.width(d) * jitter.sample(&mut r))
                .collect();
            bx.clamp(&mut mid);
            cands.push(mid);
        }
        let mut near: Vec<f64> = (0..dim)
            .map(|d| ti.0[d] + 0.02 * bx.width(d) * jitter.sample(&mut r))
            .collect();
        bx.clamp(&mut near);
        cands.push(near);
    }

    let mut scored: Vec<(f64, Vec<f64>)> = Vec::with_capacity(cands.len());
    for c in cands {
        let p = model.predict_slice(&c)?;
        scored.push((ei_from_moments(p.mean, p.std_dev(), f_min), c));
    }
    scored.sort_by(rank);

    let step: Vec<f64> = (0..dim).map(|d| 0.05 * bx.width(d)).collect();
    let opts = NelderMeadOptions {
        max_evals: 120,
        f_tol: 1e-12,
        x_tol: 1e-6 * step.iter().cloned().fold(0.0, f64::max),
    };
    let mut finalists: Vec<(f64, Vec<f64>)> = Vec::new();
    for (ei0, start) in scored.iter().take(config.refine_top.max(1)) {
        finalists.push((*ei0, start.clone()));
        if *ei0 <= 0.0 {
            continue;
        }
        let res = nelder_mead(
            |x| match model.predict_slice(x) {
                Ok(p) => -ei_from_moments(p.mean, p.std_dev(), f_min),
                Err(_) => f64::INFINITY,
            },
            start,
            &step,
            &bx.lower,
            &bx.upper,
            opts,
        );
        if -res.f > *ei0 {
            finalists.push((-res.f, res.x));
        }
    }
    finalists.sort_by(rank);
    let (ei, theta) = finalists.swap_remove(0);
    Ok((PolicyParams(theta), ei))
}

/// Kernel used before there are enough points to tune.
fn untuned_kernel(bx: &ParamBox, config: &TuneConfig, targets: &[f64]) -> KernelSpec {
    let var = crate::numeric::sample_sd(targets).powi(2);
    KernelSpec {
        nu: config.nu,
        signal_variance: if var > 0.0 { var } else { 1.0 },
        lengthscales: (0..bx.dim()).map(|d| 0.25 * bx.width(d)).collect(),
        noise_variance: 1e-6,
    }
}

/// Fit the surrogate to negated values, retuning hyperparameters.
fn fit_negated(
    records: &[EvaluationRecord],
    bx: &ParamBox,
    config: &GpConfig,
    warm: Option<&KernelSpec>,
    seed: u64,
) -> Result<GpModel> {
    let inputs: Vec<PolicyParams> = records.iter().map(|r| r.theta.clone()).collect();
    let targets: Vec<f64> = records.iter().map(|r| -r.value).collect();
    let noise = config
        .per_point_noise
        .then(|| records.iter().map(|r| r.std_dev * r.std_dev).collect::<Vec<_>>());
    let kernel = if records.len() < 3 {
        untuned_kernel(bx, &config.tune, &targets)
    } else {
        let mut tune = TuneConfig {
            seed,
            restarts: if warm.is_some() {
                config.retune_restarts.max(1)
            } else {
                config.tune.restarts
            },
            ..config.tune.clone()
        };
        // exact evaluations: pin the nugget so the evidence cannot explain
        // the targets away as noise
        if records.iter().all(|r| r.std_dev == 0.0) {
            let lo = tune.log_noise_bounds.0;
            tune.log_noise_bounds = (lo, lo);
        }
        tune_with_warm_start(&inputs, &targets, noise.as_deref(), &tune, warm)?
    };
    GpModel::fit(kernel, inputs, targets, noise, config.tune.center)
}

/// Run the full EI loop: initial space-filling design, then EI steps until
/// the budget is spent or the best EI drops to the stop threshold.
///
/// `evaluator` returns `(value, std_dev)` for a parameter vector. If it
/// fails, the error is returned with the partial trace attached.
pub fn optimize_policy<F>(
    mut evaluator: F,
    bx: &ParamBox,
    budget: &Budget,
    config: &GpConfig,
    seed: u64,
) -> Result<OptimizationTrace>
where
    F: FnMut(&PolicyParams) -> Result<(f64, f64)>,
{
    if budget.n_initial == 0 {
        return Err(Error::argument("initial design needs at least one point"));
    }
    let mut records: Vec<EvaluationRecord> = Vec::with_capacity(budget.n_initial + budget.n_ei);
    let mut evaluate = |theta: PolicyParams, source: Source, records: &mut Vec<EvaluationRecord>| -> Result<()> {
        match evaluator(&theta) {
            Ok((value, std_dev)) => {
                records.push(EvaluationRecord {
                    theta,
                    value,
                    std_dev: std_dev.max(0.0),
                    source,
                });
                Ok(())
            }
            Err(e) => Err(Error::Evaluator {
                completed: records.len(),
                source: Box::new(e),
                partial: Box::new(OptimizationTrace::from_records(records.clone())),
            }),
        }
    };

    for theta in space_filling_design(bx, budget.n_initial, rng::derive(seed, 1, 0))? {
        evaluate(theta, Source::InitialDesign, &mut records)?;
    }

    let mut kernel: Option<KernelSpec> = None;
    for step in 0..budget.n_ei {
        let model = fit_negated(&records, bx, config, kernel.as_ref(), rng::derive(seed, 2, step as u64))?;
        if records.len() >= 3 {
            kernel = Some(model.kernel().clone());
        }
        let f_min = records.iter().map(|r| -r.value).fold(f64::INFINITY, f64::min);
        let (theta, ei) = maximize_ei(&model, bx, f_min, rng::derive(seed, 3, step as u64), config)?;
        if ei <= budget.ei_stop_threshold {
            break;
        }
        evaluate(theta, Source::EiStep, &mut records)?;
    }
    Ok(OptimizationTrace::from_records(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Smoothness;

    #[test]
    fn ei_hand_values() {
        assert_eq!(ei_from_moments(0.3, 0.0, 0.3), 0.0);
        assert!((ei_from_moments(0.0, 1.0, 0.0) - 0.398_942_280_401_432_7).abs() < 1e-12);
        let want = norm_cdf(1.0) + norm_pdf(1.0);
        assert!((ei_from_moments(-1.0, 1.0, 0.0) - want).abs() < 1e-12);
        assert!((want - 1.0833).abs() < 1e-4);
        // zero variance reduces to the positive part of the improvement
        assert_eq!(ei_from_moments(-0.5, 1e-13, 0.0), 0.5);
    }

    #[test]
    fn ei_nonnegative_and_increasing_in_sigma() {
        for mu in [-2.0, -0.5, 0.0, 0.5, 3.0, 10.0] {
            let mut prev = -1.0;
            for k in 1..200 {
                let s = k as f64 * 0.05;
                let e = ei_from_moments(mu, s, 0.0);
                assert!(e >= 0.0);
                if e > 1e-300 {
                    assert!(e >= prev, "mu={mu} sigma={s}");
                }
                prev = e;
            }
        }
    }

    #[test]
    fn design_stratified_and_deterministic() {
        let bx = ParamBox::unit_square();
        let d = space_filling_design(&bx, 50, 9).unwrap();
        for dim in 0..2 {
            let mut bins = [0usize; 50];
            for p in &d {
                bins[((p.0[dim] / 0.02).floor() as usize).min(49)] += 1;
            }
            assert!(bins.iter().all(|c| *c == 1));
        }
        assert_eq!(d, space_filling_design(&bx, 50, 9).unwrap());
        let one = space_filling_design(&bx, 1, 2).unwrap();
        assert_eq!(one.len(), 1);
        assert!(bx.contains(&one[0]));
    }

    #[test]
    fn ei_maximizer_explores_away_from_single_point() {
        let k = KernelSpec::new(Smoothness::ThreeHalves, 1.0, vec![0.2, 0.2], 1e-8).unwrap();
        let m = GpModel::fit(k, vec![PolicyParams(vec![0.5, 0.5])], vec![0.0], None, true).unwrap();
        let (theta, ei) = maximize_ei(&m, &ParamBox::unit_square(), 0.0, 1, &GpConfig::default()).unwrap();
        let d = ((theta.0[0] - 0.5).powi(2) + (theta.0[1] - 0.5).powi(2)).sqrt();
        assert!(d > 0.1, "{theta:?}");
        assert!(ei > 0.0);
        let again = maximize_ei(&m, &ParamBox::unit_square(), 0.0, 1, &GpConfig::default()).unwrap();
        assert_eq!(again.0, theta);
    }

    #[test]
    fn degenerate_model_returns_lexicographically_smallest_candidate() {
        // the training mean sits far below f_min and variance is negligible,
        // so every candidate has zero EI
        let k = KernelSpec::new(Smoothness::ThreeHalves, 1e-30, vec![0.5, 0.5], 0.0).unwrap();
        let m = GpModel::fit(k, vec![PolicyParams(vec![0.5, 0.5])], vec![100.0], None, true).unwrap();
        let cfg = GpConfig::default();
        let (theta, ei) = maximize_ei(&m, &ParamBox::unit_square(), 0.0, 4, &cfg).unwrap();
        assert_eq!(ei, 0.0);
        // reproduce the candidate set and take the smallest
        let mut r = rng::stream(4);
        let mut cands: Vec<Vec<f64>> = shifted_halton(cfg.candidates, 2, &mut r);
        use rand_distr::{Distribution, Normal};
        let n = Normal::new(0.0, 1.0).unwrap();
        let mut near = vec![0.5 + 0.02 * n.sample(&mut r), 0.5 + 0.02 * n.sample(&mut r)];
        ParamBox::unit_square().clamp(&mut near);
        cands.push(near);
        cands.sort_by(|a, b| lex_cmp(a, b));
        assert_eq!(theta.0, cands[0]);
    }

    fn bowl(theta: &PolicyParams, center: [f64; 2]) -> f64 {
        -((theta.0[0] - center[0]).powi(2) + (theta.0[1] - center[1]).powi(2))
    }

    #[test]
    fn bowl_optimum_found() {
        let c = [0.3, 0.7];
        let budget = Budget { n_initial: 10, n_ei: 30, ei_stop_threshold: 1e-6 };
        let tr = optimize_policy(|t| Ok((bowl(t, c), 0.0)), &ParamBox::unit_square(), &budget, &GpConfig::default(), 5).unwrap();
        let d = ((tr.best_theta.0[0] - c[0]).powi(2) + (tr.best_theta.0[1] - c[1]).powi(2)).sqrt();
        assert!(d < 0.05, "{:?}", tr.best_theta);
        assert_eq!(tr.budget_used, tr.records.len());
        assert_eq!(tr.best_value, bowl(&tr.best_theta, c));
        // running best never decreases
        let mut best = f64::NEG_INFINITY;
        for r in &tr.records {
            best = best.max(r.value);
        }
        assert_eq!(best, tr.best_value);
    }

    #[test]
    fn zero_ei_budget_is_just_the_design() {
        let budget = Budget { n_initial: 7, n_ei: 0, ei_stop_threshold: 0.0 };
        let tr = optimize_policy(|t| Ok((t.0[0], 0.1)), &ParamBox::unit_square(), &budget, &GpConfig::default(), 1).unwrap();
        assert_eq!(tr.records.len(), 7);
        assert!(tr.records.iter().all(|r| r.source == Source::InitialDesign));
        let max = tr.records.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(tr.best_value, max);
    }

    #[test]
    fn evaluator_failure_keeps_partial_trace() {
        let mut calls = 0;
        let budget = Budget { n_initial: 5, n_ei: 5, ei_stop_threshold: 0.0 };
        let err = optimize_policy(
            |_| {
                calls += 1;
                if calls == 4 {
                    Err(Error::Estimation("boom".into()))
                } else {
                    Ok((1.0, 0.0))
                }
            },
            &ParamBox::unit_square(),
            &budget,
            &GpConfig::default(),
            1,
        )
        .unwrap_err();
        match err {
            Error::Evaluator { completed, partial, .. } => {
                assert_eq!(completed, 3);
                assert_eq!(partial.records.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn earliest_best_wins_ties() {
        let rec = |v: f64, x: f64| EvaluationRecord {
            theta: PolicyParams(vec![x]),
            value: v,
            std_dev: 0.0,
            source: Source::InitialDesign,
        };
        let tr = OptimizationTrace::from_records(vec![rec(1.0, 0.1), rec(2.0, 0.2), rec(2.0, 0.3)]);
        assert_eq!(tr.best_theta.0, vec![0.2]);
    }
}
