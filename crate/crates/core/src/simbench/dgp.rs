use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Trajectory;
use crate::rng;

/// One of the three single-covariate simulation settings.
///
/// `x = w * U` with `U ~ Uniform(0,1)`, `A ~ Bernoulli(0.5)` and
/// `Y = gamma0 + gamma1 * x + A * tau(x)` where `tau` depends on the setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpSpec {
    pub setting: u8,
    pub w: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub n: usize,
    /// Setting 1 only: use `1(x < 0.25 or x > 0.75)` as the indicator
    /// instead of the literal `1(x < 0.75 or x > 0.25)`, which is always 1.
    pub setting1_corrected: bool,
}

impl Default for DgpSpec {
    fn default() -> Self {
        DgpSpec {
            setting: 1,
            w: 1.0,
            gamma0: 0.0,
            gamma1: 1.0,
            n: 500,
            setting1_corrected: false,
        }
    }
}

pub const PROPENSITY: f64 = 0.5;

impl DgpSpec {
    pub fn new(setting: u8, w: f64, n: usize) -> Result<Self> {
        let s = DgpSpec {
            setting,
            w,
            n,
            ..Default::default()
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.setting) {
            return Err(Error::argument(format!("setting must be 1, 2 or 3, got {}", self.setting)));
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::argument("w must be positive"));
        }
        if self.n == 0 {
            return Err(Error::argument("sample size must be at least 1"));
        }
        Ok(())
    }

    fn setting1_indicator(&self, x: f64) -> bool {
        if self.setting1_corrected {
            !(0.25..=0.75).contains(&x)
        } else {
            x < 0.75 || x > 0.25
        }
    }

    /// Treatment-effect term `tau(x)`.
    pub fn tau(&self, x: f64) -> f64 {
        match self.setting {
            1 => {
                if self.setting1_indicator(x) {
                    1.0
                } else {
                    0.5 * x
                }
            }
            2 => (2.0 * PI * x).cos(),
            _ => (4.0 * PI * x).cos(),
        }
    }

    /// Antiderivative of `tau`, used by the closed-form oracle.
    pub fn tau_antiderivative(&self, x: f64) -> f64 {
        match self.setting {
            1 if !self.setting1_corrected => x,
            1 => {
                if x <= 0.25 {
                    x
                } else if x <= 0.75 {
                    0.25 + (x * x - 0.0625) / 4.0
                } else {
                    0.375 + (x - 0.75)
                }
            }
            2 => (2.0 * PI * x).sin() / (2.0 * PI),
            _ => (4.0 * PI * x).sin() / (4.0 * PI),
        }
    }

    /// Points where `tau` is not smooth (for quadrature splitting).
    pub fn breakpoints(&self) -> &'static [f64] {
        if self.setting == 1 && self.setting1_corrected {
            &[0.25, 0.75]
        } else {
            &[]
        }
    }

    pub fn outcome(&self, x: f64, a: u8) -> f64 {
        self.gamma0 + self.gamma1 * x + a as f64 * self.tau(x)
    }
}

pub fn generate_dataset(spec: &DgpSpec, seed: u64) -> Result<Vec<Trajectory>> {
    spec.validate()?;
    let mut r = rng::stream(seed);
    Ok((0..spec.n)
        .map(|_| {
            let u: f64 = r.random();
            let x = spec.w * u;
            let a = r.random_bool(PROPENSITY) as u8;
            Trajectory {
                x: vec![x],
                a,
                y: spec.outcome(x, a),
                propensity: PROPENSITY,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_formulas() {
        let s2 = DgpSpec::new(2, 1.0, 10).unwrap();
        assert!((s2.outcome(0.25, 1) - 0.25).abs() < 1e-15);
        let s3 = DgpSpec::new(3, 1.0, 10).unwrap();
        assert!((s3.outcome(0.25, 1) + 0.75).abs() < 1e-15);
        let s1 = DgpSpec::new(1, 1.0, 10).unwrap();
        for x in [0.01, 0.25, 0.5, 0.75, 0.99] {
            assert_eq!(s1.outcome(x, 1), x + 1.0);
        }
        let c = DgpSpec { setting1_corrected: true, ..s1 };
        assert_eq!(c.outcome(0.5, 1), 0.5 + 0.25);
        assert_eq!(c.outcome(0.1, 1), 1.1);
    }

    #[test]
    fn antiderivatives_differentiate_to_tau() {
        for spec in [
            DgpSpec::new(1, 1.0, 1).unwrap(),
            DgpSpec { setting1_corrected: true, ..DgpSpec::new(1, 1.0, 1).unwrap() },
            DgpSpec::new(2, 1.0, 1).unwrap(),
            DgpSpec::new(3, 1.0, 1).unwrap(),
        ] {
            for x in [0.1, 0.4, 0.6, 0.9, 1.1] {
                let h = 1e-6;
                let d = (spec.tau_antiderivative(x + h) - spec.tau_antiderivative(x - h)) / (2.0 * h);
                assert!((d - spec.tau(x)).abs() < 1e-6, "setting {} x {x}", spec.setting);
            }
        }
    }

    #[test]
    fn dataset_shape_and_determinism() {
        let s = DgpSpec::new(2, 1.25, 300).unwrap();
        let a = generate_dataset(&s, 4).unwrap();
        assert_eq!(a.len(), 300);
        assert!(a.iter().all(|t| t.x[0] >= 0.0 && t.x[0] < 1.25 && t.propensity == 0.5));
        assert_eq!(a, generate_dataset(&s, 4).unwrap());
        assert!(DgpSpec::new(4, 1.0, 1).is_err());
        assert!(DgpSpec::new(1, 0.0, 1).is_err());
    }
}
