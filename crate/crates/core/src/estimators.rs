//! Policy-value estimators for single-decision trajectory data.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{logistic, mean, sample_sd};
use crate::policy::{Covariates, Policy};
use crate::rng;

/// One observed decision: covariates, action, outcome and the probability of
/// the action that was taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub x: Vec<f64>,
    pub a: u8,
    pub y: f64,
    pub propensity: f64,
}

impl Trajectory {
    pub fn new(x: Vec<f64>, a: u8, y: f64, propensity: f64) -> Result<Self> {
        if a > 1 {
            return Err(Error::argument(format!("action must be 0 or 1, got {a}")));
        }
        if !(propensity > 0.0 && propensity < 1.0) {
            return Err(Error::argument(format!(
                "propensity must lie strictly inside (0,1), got {propensity}"
            )));
        }
        Ok(Trajectory { x, a, y, propensity })
    }
}

impl Covariates for Trajectory {
    /// `x` is the first covariate; `x1`, `x2`, ... index covariates from 1.
    fn feature(&self, name: &str) -> Option<f64> {
        if name == "x" {
            return self.x.first().copied();
        }
        let k: usize = name.strip_prefix('x')?.parse().ok()?;
        k.checked_sub(1).and_then(|i| self.x.get(i).copied())
    }
}

/// Point estimate with its plug-in standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub value: f64,
    pub std_dev: f64,
}

impl ValueEstimate {
    fn from_terms(terms: &[f64]) -> Self {
        ValueEstimate {
            value: mean(terms),
            std_dev: sample_sd(terms) / (terms.len() as f64).sqrt(),
        }
    }
}

fn nonempty(data: &[Trajectory]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::argument("value estimation needs at least one trajectory"));
    }
    Ok(())
}

fn weight(t: &Trajectory, policy: &Policy) -> Result<f64> {
    Ok(if policy.decide(t)? == t.a {
        1.0 / t.propensity
    } else {
        0.0
    })
}

/// Horvitz-Thompson inverse probability weighting.
pub fn ipw_value(data: &[Trajectory], policy: &Policy) -> Result<ValueEstimate> {
    nonempty(data)?;
    let terms = data
        .iter()
        .map(|t| Ok(weight(t, policy)? * t.y))
        .collect::<Result<Vec<_>>>()?;
    Ok(ValueEstimate::from_terms(&terms))
}

/// Hájek (self-normalized) inverse probability weighting.
pub fn sipw_value(data: &[Trajectory], policy: &Policy) -> Result<ValueEstimate> {
    nonempty(data)?;
    let w = data
        .iter()
        .map(|t| weight(t, policy))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::Estimation(
            "no trajectory is consistent with the policy".into(),
        ));
    }
    let value = w.iter().zip(data).map(|(wi, t)| wi * t.y).sum::<f64>() / total;
    let wbar = total / data.len() as f64;
    let influence: Vec<f64> = w
        .iter()
        .zip(data)
        .map(|(wi, t)| wi * (t.y - value) / wbar)
        .collect();
    Ok(ValueEstimate {
        value,
        std_dev: sample_sd(&influence) / (data.len() as f64).sqrt(),
    })
}

/// One basis column of a linear outcome model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Intercept,
    /// Covariate by zero-based index.
    X(usize),
    A,
    /// Action times covariate.
    AX(usize),
}

impl Term {
    #[inline]
    fn eval(&self, x: &[f64], a: u8) -> f64 {
        let a = a as f64;
        match self {
            Term::Intercept => 1.0,
            Term::X(i) => x[*i],
            Term::A => a,
            Term::AX(i) => a * x[*i],
        }
    }
}

/// Basis recipe for [`OutcomeModel`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Recipe(pub Vec<Term>);

impl Recipe {
    /// `{1, x, a}`: no interaction, no nonlinearity.
    pub fn additive() -> Self {
        Recipe(vec![Term::Intercept, Term::X(0), Term::A])
    }

    /// `{1, x, a, a*x}`; saturated when `x` is binary.
    pub fn interaction() -> Self {
        Recipe(vec![Term::Intercept, Term::X(0), Term::A, Term::AX(0)])
    }

    pub fn intercept_only() -> Self {
        Recipe(vec![Term::Intercept])
    }

    fn max_covariate(&self) -> Option<usize> {
        self.0
            .iter()
            .filter_map(|t| match t {
                Term::X(i) | Term::AX(i) => Some(*i),
                _ => None,
            })
            .max()
    }
}

impl Default for Recipe {
    fn default() -> Self {
        Recipe::additive()
    }
}

/// Least-squares conditional-mean model `m(x, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub recipe: Recipe,
    pub coefficients: Vec<f64>,
}

/// Ridge penalty used when the normal equations are singular.
pub const RIDGE_FALLBACK: f64 = 1e-8;

impl OutcomeModel {
    pub fn zero(recipe: Recipe) -> Self {
        let n = recipe.0.len();
        OutcomeModel {
            recipe,
            coefficients: vec![0.0; n],
        }
    }

    #[inline]
    pub fn predict(&self, x: &[f64], a: u8) -> f64 {
        self.recipe
            .0
            .iter()
            .zip(&self.coefficients)
            .map(|(t, b)| b * t.eval(x, a))
            .sum()
    }
}

pub fn fit_outcome_model(data: &[Trajectory], recipe: &Recipe) -> Result<OutcomeModel> {
    nonempty(data)?;
    if recipe.0.is_empty() {
        return Err(Error::argument("outcome recipe has no terms"));
    }
    if let Some(i) = recipe.max_covariate() {
        if data.iter().any(|t| t.x.len() <= i) {
            return Err(Error::argument(format!("recipe references missing covariate {i}")));
        }
    }
    let p = recipe.0.len();
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut row = vec![0.0; p];
    for t in data {
        for (j, term) in recipe.0.iter().enumerate() {
            row[j] = term.eval(&t.x, t.a);
        }
        for i in 0..p {
            xty[i] += row[i] * t.y;
            for j in 0..=i {
                xtx[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            xtx[(j, i)] = xtx[(i, j)];
        }
    }
    let solve = |m: DMatrix<f64>| m.cholesky().map(|c| c.solve(&xty));
    // A numerically singular design can still factor; reject solutions that
    // are not finite or that blow up relative to the data.
    let beta = solve(xtx.clone())
        .filter(|b| b.iter().all(|v| v.is_finite()) && is_well_conditioned(&xtx))
        .or_else(|| {
            let mut r = xtx.clone();
            let scale = (0..p).map(|i| xtx[(i, i)]).fold(0.0, f64::max).max(1.0);
            for i in 0..p {
                r[(i, i)] += RIDGE_FALLBACK * scale;
            }
            solve(r)
        })
        .ok_or_else(|| Error::numerical("outcome model normal equations could not be solved"))?;
    Ok(OutcomeModel {
        recipe: recipe.clone(),
        coefficients: beta.iter().copied().collect(),
    })
}

fn is_well_conditioned(m: &DMatrix<f64>) -> bool {
    let ev = m.clone().symmetric_eigenvalues();
    let max = ev.iter().cloned().fold(0.0f64, f64::max);
    let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    max > 0.0 && min > max * 1e-13
}

/// Plug-in G-computation.
pub fn gcomp_value(data: &[Trajectory], policy: &Policy, model: &OutcomeModel) -> Result<ValueEstimate> {
    nonempty(data)?;
    let terms = data
        .iter()
        .map(|t| Ok(model.predict(&t.x, policy.decide(t)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ValueEstimate::from_terms(&terms))
}

/// Augmented IPW: weighted residual plus plug-in.
pub fn aipwe_value(data: &[Trajectory], policy: &Policy, model: &OutcomeModel) -> Result<ValueEstimate> {
    nonempty(data)?;
    let terms = data
        .iter()
        .map(|t| {
            let d = policy.decide(t)?;
            let w = if d == t.a { 1.0 / t.propensity } else { 0.0 };
            Ok(w * (t.y - model.predict(&t.x, t.a)) + model.predict(&t.x, d))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ValueEstimate::from_terms(&terms))
}

/// Which value estimator to run; outcome-model estimators carry their recipe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    Ipw,
    Sipw,
    Gcomp {
        #[serde(default)]
        recipe: Recipe,
    },
    Aipwe {
        #[serde(default)]
        recipe: Recipe,
    },
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Ipw => "ipw",
            Estimator::Sipw => "sipw",
            Estimator::Gcomp { .. } => "gcomp",
            Estimator::Aipwe { .. } => "aipwe",
        }
    }

    /// Parse `ipw`, `sipw`, `gcomp` or `aipwe`; model-based estimators get the
    /// default additive recipe.
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ipw" => Ok(Estimator::Ipw),
            "sipw" => Ok(Estimator::Sipw),
            "gcomp" | "g-comp" | "gcomputation" => Ok(Estimator::Gcomp {
                recipe: Recipe::default(),
            }),
            "aipwe" | "aipw" => Ok(Estimator::Aipwe {
                recipe: Recipe::default(),
            }),
            other => Err(Error::argument(format!("unknown estimator `{other}`"))),
        }
    }

    /// Fit any nuisance model once so repeated policy evaluations on the
    /// same data reuse it.
    pub fn prepare(&self, data: &[Trajectory]) -> Result<PreparedEstimator> {
        let model = match self {
            Estimator::Gcomp { recipe } | Estimator::Aipwe { recipe } => {
                Some(fit_outcome_model(data, recipe)?)
            }
            _ => None,
        };
        Ok(PreparedEstimator {
            estimator: self.clone(),
            model,
        })
    }

    pub fn estimate(&self, data: &[Trajectory], policy: &Policy) -> Result<ValueEstimate> {
        self.prepare(data)?.estimate(data, policy)
    }
}

#[derive(Debug, Clone)]
pub struct PreparedEstimator {
    estimator: Estimator,
    model: Option<OutcomeModel>,
}

impl PreparedEstimator {
    pub fn model(&self) -> Option<&OutcomeModel> {
        self.model.as_ref()
    }

    pub fn estimate(&self, data: &[Trajectory], policy: &Policy) -> Result<ValueEstimate> {
        match (&self.estimator, &self.model) {
            (Estimator::Ipw, _) => ipw_value(data, policy),
            (Estimator::Sipw, _) => sipw_value(data, policy),
            (Estimator::Gcomp { .. }, Some(m)) => gcomp_value(data, policy, m),
            (Estimator::Aipwe { .. }, Some(m)) => aipwe_value(data, policy, m),
            _ => unreachable!("model-based estimator prepared without a model"),
        }
    }
}

/// Nonparametric bootstrap draws of an estimator's value (nuisance models
/// are refit on every resample).
pub fn value_draws(
    data: &[Trajectory],
    policy: &Policy,
    estimator: &Estimator,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    nonempty(data)?;
    if n_draws < 2 {
        return Err(Error::argument("at least two bootstrap draws are required"));
    }
    let mut r = rng::stream(seed);
    let n = data.len();
    let mut resample = Vec::with_capacity(n);
    (0..n_draws)
        .map(|_| {
            resample.clear();
            resample.extend((0..n).map(|_| data[r.random_range(0..n)].clone()));
            Ok(estimator.estimate(&resample, policy)?.value)
        })
        .collect()
}

/// Logistic propensity model `P(A=1 | x)` on `{1, x...}` by Newton-Raphson;
/// returns fitted `P(A = a_i | x_i)` per trajectory, clipped to [0.01, 0.99].
pub fn fit_logistic_propensities(data: &[Trajectory]) -> Result<Vec<f64>> {
    nonempty(data)?;
    let p = data[0].x.len() + 1;
    let design = |t: &Trajectory| -> Vec<f64> {
        std::iter::once(1.0).chain(t.x.iter().copied()).collect()
    };
    let mut beta = DVector::<f64>::zeros(p);
    for _ in 0..50 {
        let mut h = DMatrix::<f64>::zeros(p, p);
        let mut g = DVector::<f64>::zeros(p);
        for t in data {
            let z = design(t);
            let eta: f64 = z.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            let mu = logistic(eta);
            let w = (mu * (1.0 - mu)).max(1e-12);
            for i in 0..p {
                g[i] += z[i] * (t.a as f64 - mu);
                for j in 0..p {
                    h[(i, j)] += w * z[i] * z[j];
                }
            }
        }
        for i in 0..p {
            h[(i, i)] += 1e-8;
        }
        let step = h
            .cholesky()
            .ok_or_else(|| Error::numerical("propensity model Hessian is singular"))?
            .solve(&g);
        beta += &step;
        if step.amax() < 1e-10 {
            break;
        }
    }
    Ok(data
        .iter()
        .map(|t| {
            let z = design(t);
            let p1 = logistic(z.iter().zip(beta.iter()).map(|(a, b)| a * b).sum());
            let pa = if t.a == 1 { p1 } else { 1.0 - p1 };
            pa.clamp(0.01, 0.99)
        })
        .collect())
}

/// Write trajectories as CSV: covariate columns, then `a,y,propensity`.
pub fn write_trajectories_csv(path: &Path, data: &[Trajectory]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let p = data.first().map_or(1, |t| t.x.len());
    let mut header: Vec<String> = if p == 1 {
        vec!["x".into()]
    } else {
        (1..=p).map(|i| format!("x{i}")).collect()
    };
    header.extend(["a", "y", "propensity"].map(String::from));
    w.write_record(&header)?;
    for t in data {
        let mut rec: Vec<String> = t.x.iter().map(|v| crate::config::fmt_f64(*v)).collect();
        rec.push(t.a.to_string());
        rec.push(crate::config::fmt_f64(t.y));
        rec.push(crate::config::fmt_f64(t.propensity));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectories_csv(path: &Path) -> Result<Vec<Trajectory>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::argument(format!("trajectory CSV lacks a `{name}` column")))
    };
    let (ia, iy, ip) = (col("a")?, col("y")?, col("propensity")?);
    let xcols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.trim().starts_with('x'))
        .map(|(i, _)| i)
        .collect();
    if xcols.is_empty() {
        return Err(Error::argument("trajectory CSV has no covariate columns"));
    }
    let parse = |s: &str, what: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::argument(format!("cannot parse {what} value `{s}`")))
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let x = xcols
            .iter()
            .map(|&i| parse(&rec[i], "covariate"))
            .collect::<Result<Vec<_>>>()?;
        let a = parse(&rec[ia], "action")?;
        if a != 0.0 && a != 1.0 {
            return Err(Error::argument(format!("action must be 0 or 1, got {a}")));
        }
        out.push(Trajectory::new(
            x,
            a as u8,
            parse(&rec[iy], "outcome")?,
            parse(&rec[ip], "propensity")?,
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::ThresholdPolicy;
    use rand::SeedableRng;

    fn treat_all() -> Policy {
        Policy::Threshold(ThresholdPolicy::new(1.0, 1.0))
    }

    fn never() -> Policy {
        Policy::Threshold(ThresholdPolicy::new(0.0, 1.0))
    }

    fn t(x: f64, a: u8, y: f64, p: f64) -> Trajectory {
        Trajectory::new(vec![x], a, y, p).unwrap()
    }

    fn random_data(seed: u64, n: usize) -> Vec<Trajectory> {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x: f64 = r.random();
                let a = r.random_bool(0.5) as u8;
                t(x, a, r.random::<f64>() * 3.0 - 1.0, r.random_range(0.1..0.9))
            })
            .collect()
    }

    #[test]
    fn ipw_small_cases() {
        let d = vec![t(0.3, 1, 1.0, 0.5), t(0.6, 1, 0.0, 0.5)];
        assert_eq!(ipw_value(&d, &treat_all()).unwrap().value, 1.0);
        assert_eq!(ipw_value(&d, &never()).unwrap().value, 0.0);
        assert!(matches!(ipw_value(&[], &never()), Err(Error::Argument(_))));
    }

    #[test]
    fn sipw_small_cases() {
        let d = vec![t(0.3, 1, 1.0, 0.5), t(0.6, 1, 0.0, 0.5)];
        assert_eq!(sipw_value(&d, &treat_all()).unwrap().value, 0.5);
        assert!(matches!(sipw_value(&d, &never()), Err(Error::Estimation(_))));
    }

    #[test]
    fn sipw_location_equivariance_and_weight_scale_invariance() {
        let d = random_data(5, 300);
        let p = Policy::Threshold(ThresholdPolicy::new(0.3, 0.8));
        let base = sipw_value(&d, &p).unwrap().value;
        let shifted: Vec<Trajectory> = d.iter().map(|r| Trajectory { y: r.y + 2.75, ..r.clone() }).collect();
        assert!((sipw_value(&shifted, &p).unwrap().value - base - 2.75).abs() < 1e-12);
        // uniformly scaling propensities scales every weight by the same factor
        let scaled: Vec<Trajectory> = d
            .iter()
            .map(|r| Trajectory { propensity: r.propensity * 0.5, ..r.clone() })
            .collect();
        assert!((sipw_value(&scaled, &p).unwrap().value - base).abs() < 1e-12);
    }

    #[test]
    fn exact_linear_recovery() {
        let d: Vec<Trajectory> = (0..40)
            .map(|i| {
                let x = i as f64 / 13.0;
                let a = (i % 3 == 0) as u8;
                t(x, a, 2.0 + 3.0 * x + a as f64, 0.5)
            })
            .collect();
        let m = fit_outcome_model(&d, &Recipe::additive()).unwrap();
        for (got, want) in m.coefficients.iter().zip([2.0, 3.0, 1.0]) {
            assert!((got - want).abs() < 1e-8);
        }
        let c: Vec<Trajectory> = d.iter().map(|r| Trajectory { y: 4.2, ..r.clone() }).collect();
        let m = fit_outcome_model(&c, &Recipe::intercept_only()).unwrap();
        assert!((m.coefficients[0] - 4.2).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_design_falls_back_to_ridge() {
        // every unit treated: the action column duplicates the intercept
        let d: Vec<Trajectory> = (0..10).map(|i| t(i as f64, 1, 1.0 + i as f64, 0.5)).collect();
        let m = fit_outcome_model(&d, &Recipe::additive()).unwrap();
        assert!(m.coefficients.iter().all(|c| c.is_finite()));
        for r in &d {
            assert!((m.predict(&r.x, 1) - r.y).abs() < 1e-6);
        }
    }

    #[test]
    fn saturated_binary_gcomp_is_exact() {
        // y = 1 + 2x + a(0.5 - 3x) with x in {0,1}
        let f = |x: f64, a: u8| 1.0 + 2.0 * x + a as f64 * (0.5 - 3.0 * x);
        let d: Vec<Trajectory> = (0..40)
            .map(|i| {
                let x = (i % 2) as f64;
                let a = ((i / 2) % 2) as u8;
                t(x, a, f(x, a), 0.5)
            })
            .collect();
        let m = fit_outcome_model(&d, &Recipe::interaction()).unwrap();
        // policy treats x=0 only (x < 0.5)
        let p = Policy::Threshold(ThresholdPolicy::new(0.5, 2.0));
        let want = 0.5 * f(0.0, 1) + 0.5 * f(1.0, 0);
        assert!((gcomp_value(&d, &p, &m).unwrap().value - want).abs() < 1e-10);
        assert_eq!(gcomp_value(&d, &p, &OutcomeModel::zero(Recipe::additive())).unwrap().value, 0.0);
    }

    #[test]
    fn aipwe_reduces_to_ipw_with_zero_model() {
        for seed in 0..10 {
            let d = random_data(seed, 200);
            let p = Policy::Threshold(ThresholdPolicy::new(0.2 + 0.05 * seed as f64, 0.7));
            let a = aipwe_value(&d, &p, &OutcomeModel::zero(Recipe::interaction())).unwrap();
            let i = ipw_value(&d, &p).unwrap();
            assert!((a.value - i.value).abs() < 1e-12);
        }
    }

    #[test]
    fn aipwe_telescopes_when_all_consistent_with_unit_propensity() {
        // Trajectory::new forbids propensity 1, so build the records directly.
        let d: Vec<Trajectory> = (0..20)
            .map(|i| Trajectory { x: vec![i as f64 / 20.0], a: 1, y: (i as f64).sin(), propensity: 1.0 })
            .collect();
        let m = OutcomeModel { recipe: Recipe::interaction(), coefficients: vec![0.3, -1.0, 2.0, 0.7] };
        let got = aipwe_value(&d, &treat_all(), &m).unwrap().value;
        let want = d.iter().map(|r| r.y).sum::<f64>() / 20.0;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_draws() {
        let d: Vec<Trajectory> = (0..30).map(|i| t(i as f64 / 30.0, (i % 2) as u8, 1.5, 0.5)).collect();
        let draws = value_draws(&d, &treat_all(), &Estimator::Sipw, 2, 3).unwrap();
        assert_eq!(draws, vec![1.5, 1.5]);
        let d = random_data(9, 100);
        let a = value_draws(&d, &treat_all(), &Estimator::Ipw, 20, 42).unwrap();
        let b = value_draws(&d, &treat_all(), &Estimator::Ipw, 20, 42).unwrap();
        assert_eq!(a, b);
        assert!(value_draws(&d, &treat_all(), &Estimator::Ipw, 1, 42).is_err());
    }

    #[test]
    fn propensity_validation() {
        assert!(Trajectory::new(vec![0.1], 1, 0.0, 1.0).is_err());
        assert!(Trajectory::new(vec![0.1], 2, 0.0, 0.5).is_err());
    }

    #[test]
    fn logistic_propensities_near_half_for_randomized_data() {
        let d = random_data(1, 2000);
        let p = fit_logistic_propensities(&d).unwrap();
        assert!(p.iter().all(|v| (v - 0.5).abs() < 0.1));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = random_data(2, 25);
        write_trajectories_csv(&path, &d).unwrap();
        assert_eq!(read_trajectories_csv(&path).unwrap(), d);
    }

    #[test]
    fn feature_names() {
        let r = Trajectory::new(vec![0.1, 0.2], 0, 0.0, 0.5).unwrap();
        assert_eq!(r.feature("x"), Some(0.1));
        assert_eq!(r.feature("x2"), Some(0.2));
        assert_eq!(r.feature("x3"), None);
        assert_eq!(r.feature("x0"), None);
    }
}
