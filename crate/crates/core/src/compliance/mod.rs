//! Bayesian imputation-based value estimation under one-sided partial
//! compliance.
//!
//! Compliance with treatment 1 is perfect, so `c1` is only informative for
//! records with `a1 = 0`. The stratum value `C1(0)` of treated records is
//! imputed from a truncated-normal model fit on untreated records, and
//! outcomes are simulated from a Bayesian logistic model.

pub mod design;
pub mod mcmc;
pub mod models;
pub mod synth;
pub mod value;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::fmt_f64;
use crate::error::{Error, Result};
use crate::policy::Covariates;

pub use design::{Design, Feature};
pub use mcmc::{Chains, Diagnostics, McmcConfig};
pub use models::{
    fit_compliance_model, fit_outcome_model_bayes, impute_c1, LogitPosterior, TruncNormPosterior,
};
pub use synth::{forward_oracle, generate_pad_like_data, PadSpec};
pub use value::{value_draw, value_posterior, PreparedPopulation, SimConfig, ValuePosterior, ValueSummary};

/// One single-decision record with baseline and interim compliance.
/// `a0` is identically 0 and therefore not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceTrajectory {
    pub x0: Vec<f64>,
    pub c0: f64,
    pub x1: Vec<f64>,
    pub a1: u8,
    /// Observed compliance; `None` exactly when `a1 = 1`.
    pub c1: Option<f64>,
    pub y: u8,
}

impl ComplianceTrajectory {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.c0) {
            return Err(Error::argument(format!("c0 must lie in [0,1], got {}", self.c0)));
        }
        if self.a1 > 1 || self.y > 1 {
            return Err(Error::argument("a1 and y must be 0 or 1"));
        }
        match (self.a1, self.c1) {
            (0, Some(c)) if unit(c) => {}
            (0, Some(c)) => return Err(Error::argument(format!("c1 must lie in [0,1], got {c}"))),
            (0, None) => return Err(Error::argument("c1 must be observed when a1 = 0")),
            (_, Some(c)) if c != 1.0 => {
                return Err(Error::argument("c1 must be 1 (or blank) when a1 = 1"))
            }
            _ => {}
        }
        if self.x0.iter().chain(&self.x1).any(|v| !v.is_finite()) {
            return Err(Error::argument("covariates must be finite"));
        }
        Ok(())
    }

    /// Realized compliance: the observed value, or 1 under treatment.
    pub fn realized_c1(&self) -> f64 {
        if self.a1 == 1 {
            1.0
        } else {
            self.c1.unwrap_or(1.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceDataset {
    pub x0_names: Vec<String>,
    pub x1_names: Vec<String>,
    pub records: Vec<ComplianceTrajectory>,
}

/// A record seen through its dataset's column names, for policy lookups.
pub struct RecordView<'a> {
    pub dataset: &'a ComplianceDataset,
    pub record: &'a ComplianceTrajectory,
}

impl Covariates for RecordView<'_> {
    fn feature(&self, name: &str) -> Option<f64> {
        if name == "c0" {
            return Some(self.record.c0);
        }
        if let Some(i) = self.dataset.x0_names.iter().position(|n| n == name) {
            return Some(self.record.x0[i]);
        }
        self.dataset
            .x1_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.record.x1[i])
    }
}

impl ComplianceDataset {
    pub fn new(x0_names: Vec<String>, x1_names: Vec<String>, records: Vec<ComplianceTrajectory>) -> Result<Self> {
        let ds = ComplianceDataset {
            x0_names,
            x1_names,
            records,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let reserved = ["c0", "a1", "c1", "y"];
        for n in self.x0_names.iter().chain(&self.x1_names) {
            if reserved.contains(&n.as_str()) {
                return Err(Error::argument(format!("covariate name `{n}` is reserved")));
            }
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.x0.len() != self.x0_names.len() || r.x1.len() != self.x1_names.len() {
                return Err(Error::argument(format!("record {i} has the wrong number of covariates")));
            }
            r.validate()
                .map_err(|e| Error::argument(format!("record {i}: {e}")))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn view<'a>(&'a self, record: &'a ComplianceTrajectory) -> RecordView<'a> {
        RecordView { dataset: self, record }
    }

    /// Columns: `x0 names..., c0, x1 names..., a1, c1, y`; `c1` blank when
    /// unobserved.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.x0_names.iter().map(String::as_str).collect();
        header.push("c0");
        header.extend(self.x1_names.iter().map(String::as_str));
        header.extend(["a1", "c1", "y"]);
        w.write_record(&header)?;
        for r in &self.records {
            let mut row: Vec<String> = r.x0.iter().map(|v| fmt_f64(*v)).collect();
            row.push(fmt_f64(r.c0));
            row.extend(r.x1.iter().map(|v| fmt_f64(*v)));
            row.push(r.a1.to_string());
            row.push(if r.a1 == 1 { String::new() } else { r.c1.map(fmt_f64).unwrap_or_default() });
            row.push(r.y.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Columns before `c0` are baseline covariates, those between `c0` and
    /// `a1` interim covariates.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let pos = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::argument(format!("compliance CSV lacks a `{name}` column")))
        };
        let (ic0, ia1, ic1, iy) = (pos("c0")?, pos("a1")?, pos("c1")?, pos("y")?);
        if !(ic0 < ia1 && ia1 + 1 == ic1 && ic1 + 1 == iy && iy + 1 == header.len()) {
            return Err(Error::argument("compliance CSV columns must be x0..., c0, x1..., a1, c1, y"));
        }
        let num = |s: &str, col: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::argument(format!("bad value `{s}` in column `{col}`")))
        };
        let flag = |s: &str, col: &str| -> Result<u8> {
            match s.trim() {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(Error::argument(format!("column `{col}` must be 0 or 1, got `{other}`"))),
            }
        };
        let mut records = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let x0 = (0..ic0).map(|i| num(&rec[i], &header[i])).collect::<Result<Vec<_>>>()?;
            let x1 = (ic0 + 1..ia1)
                .map(|i| num(&rec[i], &header[i]))
                .collect::<Result<Vec<_>>>()?;
            let a1 = flag(&rec[ia1], "a1")?;
            let c1 = if rec[ic1].trim().is_empty() {
                None
            } else if a1 == 1 {
                // a treated record may spell out its (forced) compliance of 1
                num(&rec[ic1], "c1")?;
                None
            } else {
                Some(num(&rec[ic1], "c1")?)
            };
            let t = ComplianceTrajectory {
                x0,
                c0: num(&rec[ic0], "c0")?,
                x1,
                a1,
                c1,
                y: flag(&rec[iy], "y")?,
            };
            records.push(t);
        }
        ComplianceDataset::new(header[..ic0].to_vec(), header[ic0 + 1..ia1].to_vec(), records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(a1: u8, c1: Option<f64>) -> ComplianceTrajectory {
        ComplianceTrajectory {
            x0: vec![40.0],
            c0: 0.5,
            x1: vec![0.1],
            a1,
            c1,
            y: 1,
        }
    }

    #[test]
    fn ospc_validation() {
        assert!(rec(0, Some(0.3)).validate().is_ok());
        assert!(rec(1, None).validate().is_ok());
        assert!(rec(1, Some(1.0)).validate().is_ok());
        assert!(rec(1, Some(0.5)).validate().is_err());
        assert!(rec(0, None).validate().is_err());
        assert!(rec(0, Some(1.5)).validate().is_err());
        assert_eq!(rec(1, None).realized_c1(), 1.0);
    }

    #[test]
    fn csv_round_trip_blank_c1() {
        let ds = ComplianceDataset::new(
            vec!["w0".into()],
            vec!["x1".into()],
            vec![rec(0, Some(1.0 / 3.0)), rec(1, None)],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        ds.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "w0,c0,x1,a1,c1,y");
        assert!(text.lines().nth(2).unwrap().contains(",1,,1"));
        assert_eq!(ComplianceDataset::read_csv(&p).unwrap(), ds);
    }

    #[test]
    fn view_resolves_names() {
        let ds = ComplianceDataset::new(vec!["w0".into()], vec!["x1".into()], vec![rec(0, Some(0.2))]).unwrap();
        let v = ds.view(&ds.records[0]);
        assert_eq!(v.feature("w0"), Some(40.0));
        assert_eq!(v.feature("c0"), Some(0.5));
        assert_eq!(v.feature("x1"), Some(0.1));
        assert_eq!(v.feature("nope"), None);
    }
}
