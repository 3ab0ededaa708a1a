use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PolicyParams;

/// Matérn smoothness. Only the half-integer closed forms are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Smoothness {
    #[serde(rename = "0.5")]
    Half,
    #[default]
    #[serde(rename = "1.5")]
    ThreeHalves,
    #[serde(rename = "2.5")]
    FiveHalves,
}

impl Smoothness {
    pub fn from_nu(nu: f64) -> Result<Self> {
        match nu {
            0.5 => Ok(Smoothness::Half),
            1.5 => Ok(Smoothness::ThreeHalves),
            2.5 => Ok(Smoothness::FiveHalves),
            _ => Err(Error::argument(format!("Matérn nu must be 0.5, 1.5 or 2.5, got {nu}"))),
        }
    }

    pub fn nu(&self) -> f64 {
        match self {
            Smoothness::Half => 0.5,
            Smoothness::ThreeHalves => 1.5,
            Smoothness::FiveHalves => 2.5,
        }
    }

    /// Matérn correlation as a function of the scaled distance `r`.
    #[inline]
    pub fn correlation(&self, r: f64) -> f64 {
        match self {
            Smoothness::Half => (-r).exp(),
            Smoothness::ThreeHalves => {
                let s = 3f64.sqrt() * r;
                (1.0 + s) * (-s).exp()
            }
            Smoothness::FiveHalves => {
                let s = 5f64.sqrt() * r;
                (1.0 + s + s * s / 3.0) * (-s).exp()
            }
        }
    }
}

/// Matérn ARD kernel plus white noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub nu: Smoothness,
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl KernelSpec {
    pub fn new(
        nu: Smoothness,
        signal_variance: f64,
        lengthscales: Vec<f64>,
        noise_variance: f64,
    ) -> Result<Self> {
        let k = KernelSpec {
            nu,
            signal_variance,
            lengthscales,
            noise_variance,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::argument("signal variance must be positive"));
        }
        if self.lengthscales.is_empty() {
            return Err(Error::argument("at least one lengthscale is required"));
        }
        if self.lengthscales.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::argument("lengthscales must be positive"));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::argument("noise variance must be non-negative"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// `sigma^2 * m_nu(r)` for raw coordinate slices; no validation.
    #[inline]
    pub fn eval_slices(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for ((x, y), l) in a.iter().zip(b).zip(&self.lengthscales) {
            let d = (x - y) / l;
            r2 += d * d;
        }
        self.signal_variance * self.nu.correlation(r2.sqrt())
    }
}

/// Covariance between two policy parameter vectors. White noise is not
/// included here; it enters only on the Gram diagonal.
pub fn kernel_eval(spec: &KernelSpec, a: &PolicyParams, b: &PolicyParams) -> Result<f64> {
    spec.validate()?;
    if a.dim() != spec.dim() || b.dim() != spec.dim() {
        return Err(Error::argument(format!(
            "dimension mismatch: kernel has {} lengthscales, inputs have {} and {}",
            spec.dim(),
            a.dim(),
            b.dim()
        )));
    }
    Ok(spec.eval_slices(a.as_slice(), b.as_slice()))
}
