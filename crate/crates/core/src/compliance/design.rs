use serde::{Deserialize, Serialize};

use super::ComplianceDataset;
use crate::error::{Error, Result};

/// One basis term of a linear predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Intercept,
    X0(usize),
    C0,
    X1(usize),
    C1,
    A1,
    A1C1,
}

/// Raw inputs a feature can read.
#[derive(Debug, Clone, Copy)]
pub struct Inputs<'a> {
    pub x0: &'a [f64],
    pub c0: f64,
    pub x1: &'a [f64],
    pub c1: f64,
    pub a1: f64,
}

impl Feature {
    pub fn raw(&self, v: &Inputs) -> f64 {
        match *self {
            Feature::Intercept => 1.0,
            Feature::X0(i) => v.x0[i],
            Feature::C0 => v.c0,
            Feature::X1(i) => v.x1[i],
            Feature::C1 => v.c1,
            Feature::A1 => v.a1,
            Feature::A1C1 => v.a1 * v.c1,
        }
    }

    pub fn label(&self, ds: &ComplianceDataset) -> String {
        match *self {
            Feature::Intercept => "intercept".into(),
            Feature::X0(i) => ds.x0_names[i].clone(),
            Feature::C0 => "c0".into(),
            Feature::X1(i) => ds.x1_names[i].clone(),
            Feature::C1 => "c1".into(),
            Feature::A1 => "a1".into(),
            Feature::A1C1 => "a1:c1".into(),
        }
    }
}

/// Baseline-history terms `{1, x0..., c0, x1...}`.
pub fn history_features(ds: &ComplianceDataset) -> Vec<Feature> {
    let mut f = vec![Feature::Intercept];
    f.extend((0..ds.x0_names.len()).map(Feature::X0));
    f.push(Feature::C0);
    f.extend((0..ds.x1_names.len()).map(Feature::X1));
    f
}

/// Default outcome terms: history plus realized compliance and treatment.
/// The `a1:c1` product is left out because under one-sided compliance it
/// equals `a1` on every record.
pub fn outcome_features(ds: &ComplianceDataset) -> Vec<Feature> {
    let mut f = history_features(ds);
    f.extend([Feature::C1, Feature::A1]);
    f
}

/// A linear-predictor recipe with per-term standardization fixed at fit
/// time, so priors act on standardized coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub features: Vec<Feature>,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Design {
    pub fn fit<'a>(features: Vec<Feature>, rows: impl Iterator<Item = Inputs<'a>>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::argument("a design needs at least one feature"));
        }
        let p = features.len();
        let mut n = 0usize;
        let mut sum = vec![0.0; p];
        let mut sq = vec![0.0; p];
        for r in rows {
            n += 1;
            for (k, f) in features.iter().enumerate() {
                let v = f.raw(&r);
                sum[k] += v;
                sq[k] += v * v;
            }
        }
        if n == 0 {
            return Err(Error::argument("a design needs at least one row"));
        }
        let mut center = vec![0.0; p];
        let mut scale = vec![1.0; p];
        for (k, f) in features.iter().enumerate() {
            if *f == Feature::Intercept {
                continue;
            }
            let m = sum[k] / n as f64;
            let var = (sq[k] / n as f64 - m * m).max(0.0);
            center[k] = m;
            if var.sqrt() > 1e-12 {
                scale[k] = var.sqrt();
            }
        }
        Ok(Design { features, center, scale })
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn row(&self, v: &Inputs) -> Vec<f64> {
        self.features
            .iter()
            .enumerate()
            .map(|(k, f)| (f.raw(v) - self.center[k]) / self.scale[k])
            .collect()
    }

    pub fn dot(&self, v: &Inputs, coef: &[f64]) -> f64 {
        self.features
            .iter()
            .enumerate()
            .map(|(k, f)| (f.raw(v) - self.center[k]) / self.scale[k] * coef[k])
            .sum()
    }

    pub fn labels(&self, ds: &ComplianceDataset) -> Vec<String> {
        self.features.iter().map(|f| f.label(ds)).collect()
    }
}
