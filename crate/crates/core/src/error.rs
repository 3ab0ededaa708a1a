use thiserror::Error;

/// Errors raised across the crate.
///
/// The CLI maps `Argument` to exit code 1 and the numerical/convergence
/// families to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numerical failure: {message}")]
    Numerical { message: String },

    #[error("estimation failure: {0}")]
    Estimation(String),

    #[error("MCMC did not converge: {summary}")]
    Convergence {
        summary: String,
        diagnostics: Box<crate::compliance::mcmc::Diagnostics>,
    },

    #[error("evaluator failed after {completed} evaluations: {source}")]
    Evaluator {
        completed: usize,
        #[source]
        source: Box<Error>,
        partial: Box<crate::bayesopt::OptimizationTrace>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical {
            message: msg.into(),
        }
    }

    /// True for failures that come from the data or the numerics rather than
    /// from how the caller invoked something.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical { .. }
                | Error::Estimation(_)
                | Error::Convergence { .. }
                | Error::Evaluator { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
