use std::path::PathBuf;

use crate::infer::{ConvergenceIssue, Fit};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A numeric argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}:{line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The sampler ran but the draws did not pass the R-hat / ESS thresholds.
    /// The fit is still carried so callers can inspect or export it.
    #[error("convergence check failed: {}", format_issues(.issues))]
    Convergence {
        fit: Box<Fit>,
        issues: Vec<ConvergenceIssue>,
    },

    #[error("bridge sampler did not converge after {} iterations", .trace.len())]
    BridgeNotConverged { trace: Vec<f64> },

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Domain(_) | Error::InvalidInput(_) | Error::Csv { .. } | Error::Io { .. } => true,
            Error::Replicate { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

fn format_issues(issues: &[ConvergenceIssue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
