use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the command line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Parse,
    Validation,
    Compute,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("too few pairs: {nonzero} nonzero differences, need at least {required}")]
    TooFewPairs { nonzero: usize, required: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("r = {r} out of range for K = {k} studies")]
    ROutOfRange { r: usize, k: usize },

    #[error("one-sided p-values are not paired: p_left + p_right = {sum} at study {study}")]
    Unpaired { study: usize, sum: f64 },

    #[error("gene {gene}: {source}")]
    Gene {
        gene: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("pathway committee too small: {usable} usable gene sets, need at least {required}")]
    CommitteeTooSmall { usable: usize, required: usize },

    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Parse { .. } | Error::Serde(_) => ErrorCategory::Parse,
            Error::Validation(_)
            | Error::ROutOfRange { .. }
            | Error::Unpaired { .. }
            | Error::CommitteeTooSmall { .. }
            | Error::EmptySample
            | Error::TooFewPairs { .. } => ErrorCategory::Validation,
            Error::Domain(_) | Error::Degenerate(_) | Error::NonConvergence(_) => {
                ErrorCategory::Compute
            }
            Error::Gene { source, .. } => source.category(),
            Error::Io { .. } => ErrorCategory::Io,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn for_gene(self, gene: &str) -> Self {
        Error::Gene {
            gene: gene.to_string(),
            source: Box::new(self),
        }
    }
}
