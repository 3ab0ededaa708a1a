//! Synthetic stand-in for a peripheral-artery-disease cohort, with known
//! generating parameters so value estimates can be checked against forward
//! simulation.
//!
//! Baseline covariates are wound size `w0` (cm², in (0,100]) and a standard
//! normal score `z0`; baseline compliance `c0` is Beta distributed; the
//! interim covariate is `z1 = rho * z0 + sqrt(1 - rho^2) * e`. Treatment is
//! logistic in history, `C1(0)` is truncated normal, and the outcome is
//! logistic in history, realized compliance and treatment. The outcome does
//! not depend on `C1(0)` except through realized compliance, so principal
//! ignorability holds by construction.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::models::trunc_unit_from_uniform;
use super::{ComplianceDataset, ComplianceTrajectory};
use crate::error::{Error, Result};
use crate::numeric::logistic;
use crate::policy::Policy;
use crate::rng;

/// Generating parameters. Linear predictors act on raw history
/// `h = (1, w0, z0, c0, z1)`; the outcome predictor appends `(c1, a1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PadSpec {
    pub wound_beta: (f64, f64),
    pub c0_beta: (f64, f64),
    pub z1_rho: f64,
    pub propensity_coef: [f64; 5],
    pub compliance_coef: [f64; 5],
    pub compliance_sigma: f64,
    pub outcome_coef: [f64; 7],
}

impl Default for PadSpec {
    fn default() -> Self {
        PadSpec {
            wound_beta: (2.0, 3.0),
            c0_beta: (4.0, 2.0),
            z1_rho: 0.5,
            propensity_coef: [-0.1, 0.02, 0.3, -1.5, 0.3],
            compliance_coef: [0.15, -0.003, 0.0, 0.6, 0.05],
            compliance_sigma: 0.15,
            outcome_coef: [-2.5, -0.02, 0.3, 0.8, 0.2, 1.2, 0.4],
        }
    }
}

pub const X0_NAMES: [&str; 2] = ["w0", "z0"];
pub const X1_NAMES: [&str; 1] = ["z1"];

fn dot(c: &[f64], h: &[f64]) -> f64 {
    c.iter().zip(h).map(|(a, b)| a * b).sum()
}

struct History {
    w0: f64,
    z0: f64,
    c0: f64,
    z1: f64,
}

impl History {
    fn vector(&self) -> [f64; 5] {
        [1.0, self.w0, self.z0, self.c0, self.z1]
    }

    fn covariates(&self) -> [(&'static str, f64); 4] {
        [("w0", self.w0), ("z0", self.z0), ("c0", self.c0), ("z1", self.z1)]
    }
}

impl PadSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = |p: (f64, f64)| p.0 > 0.0 && p.1 > 0.0;
        if !pos(self.wound_beta) || !pos(self.c0_beta) {
            return Err(Error::argument("Beta shape parameters must be positive"));
        }
        if self.compliance_sigma.is_nan() || self.compliance_sigma <= 0.0 {
            return Err(Error::argument("compliance sigma must be positive"));
        }
        if !(-1.0..=1.0).contains(&self.z1_rho) {
            return Err(Error::argument("z1_rho must lie in [-1, 1]"));
        }
        Ok(())
    }

    fn draw_history<R: Rng>(&self, r: &mut R) -> History {
        let wound = Beta::new(self.wound_beta.0, self.wound_beta.1).expect("validated");
        let comp = Beta::new(self.c0_beta.0, self.c0_beta.1).expect("validated");
        let w0 = (100.0 * wound.sample(r)).clamp(1e-6, 100.0);
        let z0: f64 = r.sample(StandardNormal);
        let c0 = comp.sample(r);
        let e: f64 = r.sample(StandardNormal);
        let z1 = self.z1_rho * z0 + (1.0 - self.z1_rho * self.z1_rho).sqrt() * e;
        History { w0, z0, c0, z1 }
    }

    fn draw_c1_untreated<R: Rng>(&self, h: &History, r: &mut R) -> f64 {
        trunc_unit_from_uniform(dot(&self.compliance_coef, &h.vector()), self.compliance_sigma, r.random())
    }

    fn outcome_probability(&self, h: &History, c1: f64, a1: u8) -> f64 {
        let hv = h.vector();
        let full = [hv[0], hv[1], hv[2], hv[3], hv[4], c1, a1 as f64];
        logistic(dot(&self.outcome_coef, &full))
    }
}

pub fn generate_pad_like_data(spec: &PadSpec, n: usize, seed: u64) -> Result<ComplianceDataset> {
    spec.validate()?;
    let mut r = rng::stream(seed);
    let records = (0..n)
        .map(|_| {
            let h = spec.draw_history(&mut r);
            let a1 = r.random_bool(logistic(dot(&spec.propensity_coef, &h.vector()))) as u8;
            let c1 = if a1 == 1 { 1.0 } else { spec.draw_c1_untreated(&h, &mut r) };
            let y = r.random_bool(spec.outcome_probability(&h, c1, a1)) as u8;
            ComplianceTrajectory {
                x0: vec![h.w0, h.z0],
                c0: h.c0,
                x1: vec![h.z1],
                a1,
                c1: (a1 == 0).then_some(c1),
                y,
            }
        })
        .collect();
    ComplianceDataset::new(
        X0_NAMES.iter().map(|s| s.to_string()).collect(),
        X1_NAMES.iter().map(|s| s.to_string()).collect(),
        records,
    )
}

/// True value of `policy` by forward simulation of `samples` new patients
/// from the generating model. Outcome probabilities are averaged instead
/// of Bernoulli draws, which has the same expectation and less noise.
pub fn forward_oracle(spec: &PadSpec, policy: &Policy, samples: usize, seed: u64) -> Result<f64> {
    spec.validate()?;
    if samples == 0 {
        return Err(Error::argument("forward simulation needs at least one sample"));
    }
    let mut r = rng::stream(seed);
    let mut total = 0.0;
    for _ in 0..samples {
        let h = spec.draw_history(&mut r);
        let a1 = policy.decide(&h.covariates())?;
        let c1 = if a1 == 1 { 1.0 } else { spec.draw_c1_untreated(&h, &mut r) };
        total += spec.outcome_probability(&h, c1, a1);
    }
    Ok(total / samples as f64)
}
