use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("missing value at row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("metric `{metric}` does not support categorical column `{column}`")]
    UnsupportedMetric { metric: &'static str, column: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("structure {structure}: {source}")]
    LocalFit {
        structure: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("identification did not reach coverage after {iterations} iterations (assigned {assigned}/{total})")]
    IterationCap {
        iterations: usize,
        assigned: usize,
        total: usize,
    },

    #[error("stratification error: class `{class}` has {count} instances, fewer than {folds} folds")]
    Stratification {
        class: String,
        count: usize,
        folds: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input rather than by a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Parse { .. }
                | Error::EmptyDataset
                | Error::MissingValue { .. }
                | Error::UnsupportedMetric { .. }
                | Error::Config(_)
                | Error::Stratification { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
