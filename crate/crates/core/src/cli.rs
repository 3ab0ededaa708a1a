//! The `dtrgp` command line.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 on numerical or
//! convergence failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bayesopt::{optimize_policy, OptimizationTrace};
use crate::compliance::{
    fit_compliance_model, fit_outcome_model_bayes, generate_pad_like_data, value_posterior, ComplianceDataset,
    LogitPosterior, PreparedPopulation, TruncNormPosterior,
};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::estimators::{read_trajectories_csv, write_trajectories_csv, Estimator};
use crate::gp::TuneConfig;
use crate::policy::{Policy, PolicyClass, PolicyParams, ThresholdPolicy, TwoFeaturePolicy};
use crate::rng;
use crate::simbench::{
    characterize_policy_class, export_grid, generate_dataset, oracle_value, render_contour_svg, run_cell, DgpSpec,
    StudyCell, StudyConfig, SvgStyle,
};

#[derive(Debug, Parser)]
#[command(name = "dtrgp", version, about = "Bayesian optimization of dynamic treatment regimes")]
struct Cli {
    /// Master seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

/// Simulation-setting overrides; unset flags fall back to the config.
#[derive(Debug, Args, Clone)]
struct DgpArgs {
    #[arg(long)]
    setting: Option<u8>,
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// Use the corrected Setting 1 indicator.
    #[arg(long)]
    setting1_corrected: bool,
}

impl DgpArgs {
    fn apply(&self, base: &DgpSpec) -> Result<DgpSpec> {
        let mut s = *base;
        if let Some(v) = self.setting {
            s.setting = v;
        }
        if let Some(v) = self.w {
            s.w = v;
        }
        if let Some(v) = self.n {
            s.n = v;
        }
        s.setting1_corrected |= self.setting1_corrected;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a simulated dataset CSV.
    Simulate {
        #[command(flatten)]
        dgp: DgpArgs,
        /// Emit a synthetic partial-compliance cohort instead.
        #[arg(long)]
        pad: bool,
        /// File name inside the output directory.
        #[arg(long, default_value = "dataset.csv")]
        file: String,
    },
    /// Print the true value of a threshold policy.
    Oracle {
        #[command(flatten)]
        dgp: DgpArgs,
        #[arg(long, allow_hyphen_values = true)]
        beta1: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta2: f64,
    },
    /// Run expected-improvement search and write the trace.
    Optimize {
        #[command(flatten)]
        dgp: DgpArgs,
        /// Single-decision dataset CSV; simulated from the DGP when absent.
        #[arg(long, conflicts_with = "compliance_data")]
        data: Option<PathBuf>,
        /// Partial-compliance dataset CSV; searches the two-feature class
        /// with the posterior mean value as the objective.
        #[arg(long)]
        compliance_data: Option<PathBuf>,
        #[arg(long, default_value = "ipw")]
        estimator: String,
    },
    /// Fit a surrogate to a trace and write grid CSV/JSON and an SVG.
    Characterize {
        /// Trace JSON written by `optimize`.
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value = "threshold")]
        class: ClassArg,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        /// Attach the closed-form truth of the configured DGP.
        #[arg(long)]
        truth: bool,
        #[command(flatten)]
        dgp: DgpArgs,
    },
    /// Run one simulation-study cell and write its summary.
    Bench {
        #[command(flatten)]
        dgp: DgpArgs,
        #[arg(long, default_value = "ipw")]
        estimator: String,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        characterize: bool,
    },
    /// Fit the compliance and outcome posteriors.
    ComplianceFit {
        #[arg(long)]
        data: PathBuf,
    },
    /// Posterior of the value of one two-feature regime.
    ComplianceValue {
        #[arg(long)]
        data: PathBuf,
        /// Posteriors JSON written by `compliance-fit`; refit when absent.
        #[arg(long)]
        posteriors: Option<PathBuf>,
        #[arg(long)]
        theta1: f64,
        #[arg(long)]
        theta2: f64,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum ClassArg {
    Threshold,
    TwoFeature,
}

impl From<ClassArg> for PolicyClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Threshold => PolicyClass::Threshold,
            ClassArg::TwoFeature => PolicyClass::TwoFeature,
        }
    }
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
struct FittedPosteriors {
    compliance: TruncNormPosterior,
    outcome: LogitPosterior,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn fit_posteriors(data: &ComplianceDataset, cfg: &Config, seed: u64) -> Result<FittedPosteriors> {
    Ok(FittedPosteriors {
        compliance: fit_compliance_model(data, None, &cfg.mcmc, rng::derive(seed, 60, 0))?,
        outcome: fit_outcome_model_bayes(data, None, None, &cfg.mcmc, rng::derive(seed, 60, 1))?,
    })
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    std::fs::create_dir_all(&cli.out)?;
    let out = |name: &str| cli.out.join(name);
    let seed = cli.seed;
    match cli.command {
        Command::Simulate { dgp, pad, file } => {
            if pad {
                let n = dgp.n.unwrap_or(cfg.dgp.n);
                generate_pad_like_data(&cfg.pad, n, seed)?.write_csv(&out(&file))?;
            } else {
                let spec = dgp.apply(&cfg.dgp)?;
                write_trajectories_csv(&out(&file), &generate_dataset(&spec, seed)?)?;
            }
        }
        Command::Oracle { dgp, beta1, beta2 } => {
            let spec = dgp.apply(&cfg.dgp)?;
            println!("{}", oracle_value(&spec, &ThresholdPolicy::new(beta1, beta2)).value);
        }
        Command::Optimize {
            dgp,
            data,
            compliance_data,
            estimator,
        } => {
            let trace = if let Some(path) = compliance_data {
                optimize_compliance(&ComplianceDataset::read_csv(&path)?, &cfg, seed)?
            } else {
                let data = match data {
                    Some(p) => read_trajectories_csv(&p)?,
                    None => generate_dataset(&dgp.apply(&cfg.dgp)?, rng::derive(seed, 70, 0))?,
                };
                let prepared = Estimator::parse(&estimator)?.prepare(&data)?;
                optimize_policy(
                    |theta| {
                        let est = prepared.estimate(&data, &Policy::Threshold(ThresholdPolicy::new(theta.0[0], theta.0[1])))?;
                        Ok((est.value, est.std_dev))
                    },
                    &PolicyClass::Threshold.default_box(),
                    &cfg.budget,
                    &cfg.gp,
                    rng::derive(seed, 70, 1),
                )?
            };
            std::fs::write(out("trace.json"), trace.to_json()? + "\n")?;
            let names = if trace.best_theta.dim() == 2 && trace.records.iter().any(|r| r.theta.0[1] > 1.0) {
                PolicyClass::TwoFeature.default_box().names
            } else {
                PolicyClass::Threshold.default_box().names
            };
            trace.write_csv(&out("trace.csv"), &names)?;
        }
        Command::Characterize {
            trace,
            class,
            resolution,
            truth,
            dgp,
        } => {
            let trace: OptimizationTrace = serde_json::from_str(&std::fs::read_to_string(&trace)?)?;
            let class: PolicyClass = class.into();
            let bx = class.default_box();
            let spec = dgp.apply(&cfg.dgp)?;
            let truth_fn = |p: &PolicyParams| oracle_value(&spec, &ThresholdPolicy::new(p.0[0], p.0[1])).value;
            if truth && class != PolicyClass::Threshold {
                return Err(Error::argument("closed-form truth exists only for the threshold class"));
            }
            let tune = TuneConfig {
                seed: rng::derive(seed, 80, 0),
                ..cfg.gp.tune.clone()
            };
            let grid = characterize_policy_class(
                &trace.records,
                &bx,
                &[resolution, resolution],
                &tune,
                truth.then_some(&truth_fn as &dyn Fn(&PolicyParams) -> f64),
            )?;
            export_grid(&grid, &out("grid.csv"))?;
            std::fs::write(out("surface.svg"), render_contour_svg(&grid, &SvgStyle::default())?)?;
        }
        Command::Bench {
            dgp,
            estimator,
            runs,
            characterize,
        } => {
            let cell = StudyCell {
                dgp: dgp.apply(&cfg.dgp)?,
                estimator: Estimator::parse(&estimator)?,
            };
            let study = StudyConfig {
                runs: runs.unwrap_or(cfg.bench.runs),
                budget: cfg.budget,
                gp: cfg.gp.clone(),
                seed,
                characterize: characterize || cfg.bench.characterize,
                grid_resolution: cfg.bench.grid_resolution,
                truth_resolution: cfg.bench.truth_resolution,
            };
            let summary = run_cell(&cell, &study)?;
            write_json(&out("bench.json"), &summary)?;
            let brief = serde_json::json!({
                "setting": summary.setting,
                "n": summary.n,
                "w": summary.w,
                "estimator": summary.estimator,
                "runs": summary.runs,
                "excluded": summary.excluded,
                "mse": summary.mse,
                "mc_error": summary.mc_error,
                "estimate_mse": summary.estimate_mse,
                "estimate_mc_error": summary.estimate_mc_error,
                "mean_l1": summary.mean_l1,
                "mean_l2": summary.mean_l2,
            });
            println!("{}", serde_json::to_string_pretty(&brief)?);
        }
        Command::ComplianceFit { data } => {
            let data = ComplianceDataset::read_csv(&data)?;
            let fitted = fit_posteriors(&data, &cfg, seed)?;
            fitted.compliance.write_draws_csv(&out("compliance_draws.csv"))?;
            fitted.outcome.write_draws_csv(&out("outcome_draws.csv"))?;
            write_json(
                &out("diagnostics.json"),
                &serde_json::json!({
                    "compliance": fitted.compliance.diagnostics,
                    "outcome": fitted.outcome.diagnostics,
                    "warnings": fitted.outcome.warnings,
                }),
            )?;
            write_json(&out("posteriors.json"), &fitted)?;
            for w in &fitted.outcome.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::ComplianceValue {
            data,
            posteriors,
            theta1,
            theta2,
        } => {
            let data = ComplianceDataset::read_csv(&data)?;
            let fitted = match posteriors {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => fit_posteriors(&data, &cfg, seed)?,
            };
            let policy = Policy::TwoFeature(TwoFeaturePolicy::new(theta1, theta2)?);
            let post = value_posterior(
                &data,
                &policy,
                &fitted.compliance,
                &fitted.outcome,
                &cfg.simulation,
                rng::derive(seed, 61, 0),
            )?;
            write_json(&out("value.json"), &post)?;
            println!("{}", serde_json::to_string_pretty(&post.summary)?);
        }
    }
    Ok(())
}

/// EI search over the two-feature class with the value posterior as the
/// objective: mean and standard deviation of the value draws.
fn optimize_compliance(data: &ComplianceDataset, cfg: &Config, seed: u64) -> Result<OptimizationTrace> {
    let fitted = fit_posteriors(data, cfg, seed)?;
    let sim = cfg.simulation;
    let mut call = 0u64;
    optimize_policy(
        |theta| {
            call += 1;
            let policy = PolicyClass::TwoFeature.instantiate(theta)?;
            let pop = PreparedPopulation::new(data, &policy)?;
            let draws: Vec<f64> = (0..sim.n_value_draws.max(2) as u64)
                .map(|b| {
                    (0..sim.repeats as u64)
                        .map(|k| {
                            pop.draw(
                                &fitted.compliance,
                                &fitted.outcome,
                                sim.population_size,
                                rng::derive(rng::derive(seed, 62, call), 0, b * sim.repeats as u64 + k),
                            )
                        })
                        .sum::<f64>()
                        / sim.repeats as f64
                })
                .collect();
            Ok((crate::numeric::mean(&draws), crate::numeric::sample_sd(&draws)))
        },
        &PolicyClass::TwoFeature.default_box(),
        &cfg.budget,
        &cfg.gp,
        rng::derive(seed, 63, 0),
    )
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}
