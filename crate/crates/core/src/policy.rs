//! Finite-parameter policy classes.
//!
//! A policy is a pure value object that maps named covariates to a binary
//! action. Comparisons are strict, so a covariate sitting exactly on a
//! threshold is never treated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in policy-parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyParams(pub Vec<f64>);

impl PolicyParams {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument("policy parameters must be finite"));
        }
        Ok(PolicyParams(theta))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for PolicyParams {
    fn from(v: Vec<f64>) -> Self {
        PolicyParams(v)
    }
}

/// Axis-aligned hyper-rectangle of policy parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub names: Vec<String>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, names: Vec<String>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != names.len() || lower.is_empty() {
            return Err(Error::argument("box bounds and names must share a nonzero length"));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::argument(format!(
                    "box dimension {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(ParamBox { lower, upper, names })
    }

    /// `[0,1]^2` with names `beta1`, `beta2`, the threshold search space.
    pub fn unit_square() -> Self {
        ParamBox {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            names: vec!["beta1".into(), "beta2".into()],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, p: &PolicyParams) -> bool {
        p.dim() == self.dim()
            && p.0
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Clamp a raw coordinate vector into the box.
    pub fn clamp(&self, theta: &mut [f64]) {
        for (i, v) in theta.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Map a point of the unit cube onto the box.
    pub fn from_unit(&self, u: &[f64]) -> PolicyParams {
        PolicyParams(
            u.iter()
                .enumerate()
                .map(|(i, ui)| self.lower[i] + ui * self.width(i))
                .collect(),
        )
    }
}

/// Named covariate lookup used by decision rules.
pub trait Covariates {
    fn feature(&self, name: &str) -> Option<f64>;
}

impl Covariates for [(&str, f64)] {
    fn feature(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<const N: usize> Covariates for [(&str, f64); N] {
    fn feature(&self, name: &str) -> Option<f64> {
        self.as_slice().feature(name)
    }
}

fn require(cov: &(impl Covariates + ?Sized), name: &str) -> Result<f64> {
    cov.feature(name)
        .ok_or_else(|| Error::argument(format!("missing required feature `{name}`")))
}

/// `1(x < beta1 or x > beta2)` on a scalar covariate named `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub beta1: f64,
    pub beta2: f64,
}

impl ThresholdPolicy {
    pub fn new(beta1: f64, beta2: f64) -> Self {
        ThresholdPolicy { beta1, beta2 }
    }

    #[inline]
    pub fn decide_x(&self, x: f64) -> u8 {
        (x < self.beta1 || x > self.beta2) as u8
    }
}

/// `1(c0 < theta1 or w0 > theta2)`: treat on low baseline compliance or a
/// large initial wound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoFeaturePolicy {
    pub theta1: f64,
    pub theta2: f64,
}

impl TwoFeaturePolicy {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta1) {
            return Err(Error::argument(format!("theta1 must lie in [0,1], got {theta1}")));
        }
        if !(theta2 > 0.0 && theta2 <= 100.0) {
            return Err(Error::argument(format!("theta2 must lie in (0,100], got {theta2}")));
        }
        Ok(TwoFeaturePolicy { theta1, theta2 })
    }

    #[inline]
    pub fn decide_raw(&self, c0: f64, w0: f64) -> u8 {
        (c0 < self.theta1 || w0 > self.theta2) as u8
    }
}

/// Any supported decision rule. Serializes with a `class` tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Policy {
    Threshold(ThresholdPolicy),
    TwoFeature(TwoFeaturePolicy),
}

impl Policy {
    pub fn decide(&self, cov: &(impl Covariates + ?Sized)) -> Result<u8> {
        match self {
            Policy::Threshold(p) => Ok(p.decide_x(require(cov, "x")?)),
            Policy::TwoFeature(p) => Ok(p.decide_raw(require(cov, "c0")?, require(cov, "w0")?)),
        }
    }

    pub fn consistent(&self, cov: &(impl Covariates + ?Sized), observed_action: u8) -> Result<bool> {
        Ok(self.decide(cov)? == observed_action)
    }

    pub fn params(&self) -> PolicyParams {
        match self {
            Policy::Threshold(p) => PolicyParams(vec![p.beta1, p.beta2]),
            Policy::TwoFeature(p) => PolicyParams(vec![p.theta1, p.theta2]),
        }
    }
}

/// Which rule family a parameter vector indexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyClass {
    Threshold,
    TwoFeature,
}

impl PolicyClass {
    pub fn instantiate(&self, theta: &PolicyParams) -> Result<Policy> {
        if theta.dim() != 2 {
            return Err(Error::argument(format!(
                "policy class expects 2 parameters, got {}",
                theta.dim()
            )));
        }
        let (a, b) = (theta.0[0], theta.0[1]);
        Ok(match self {
            PolicyClass::Threshold => Policy::Threshold(ThresholdPolicy::new(a, b)),
            // The search box for this class is closed at 0 for theta2, so
            // evaluation tolerates the boundary even though the class is (0,100].
            PolicyClass::TwoFeature => Policy::TwoFeature(TwoFeaturePolicy { theta1: a, theta2: b }),
        })
    }

    pub fn default_box(&self) -> ParamBox {
        match self {
            PolicyClass::Threshold => ParamBox::unit_square(),
            PolicyClass::TwoFeature => ParamBox {
                lower: vec![0.0, 0.0],
                upper: vec![1.0, 100.0],
                names: vec!["theta1".into(), "theta2".into()],
            },
        }
    }
}

/// Axis-aligned lattice over the box, endpoints included, row-major
/// (last coordinate varies fastest).
pub fn enumerate_grid(bx: &ParamBox, resolution: &[usize]) -> Result<Vec<PolicyParams>> {
    if resolution.len() != bx.dim() {
        return Err(Error::argument("one resolution per box dimension is required"));
    }
    if let Some(r) = resolution.iter().find(|r| **r < 2) {
        return Err(Error::argument(format!("grid resolution must be >= 2, got {r}")));
    }
    let axes: Vec<Vec<f64>> = resolution
        .iter()
        .enumerate()
        .map(|(d, &r)| {
            (0..r)
                .map(|k| {
                    if k == r - 1 {
                        bx.upper[d]
                    } else {
                        bx.lower[d] + bx.width(d) * k as f64 / (r - 1) as f64
                    }
                })
                .collect()
        })
        .collect();
    let total: usize = resolution.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; resolution.len()];
    for _ in 0..total {
        out.push(PolicyParams(
            idx.iter().enumerate().map(|(d, &k)| axes[d][k]).collect(),
        ));
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < resolution[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(out)
}
