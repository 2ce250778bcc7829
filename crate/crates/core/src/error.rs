//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by data ingestion, model fitting, and estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column `{0}` in header")]
    MissingColumn(String),

    #[error("data row {row}, column `{column}`: expected 0 or 1, found `{value}`")]
    NonBinary {
        row: usize,
        column: String,
        value: String,
    },

    #[error("data row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("data row {row}, column `{column}`: negative or non-finite mediator value {value}")]
    BadMediatorValue {
        row: usize,
        column: String,
        value: f64,
    },

    #[error("data row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("prevalence filter at threshold {threshold} removed every taxon")]
    AllTaxaFiltered { threshold: f64 },

    #[error("sample {sample}: row sum {row_sum} is below the rarefaction depth {depth}")]
    RarefactionDepth {
        sample: usize,
        row_sum: u64,
        depth: u64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("design matrix is rank deficient (non-positive pivot at column {pivot})")]
    RankDeficient { pivot: usize },

    #[error("{what} did not converge within {limit} iterations")]
    NonConvergence { what: &'static str, limit: usize },

    #[error("column `{0}` is constant; both levels are required")]
    DegenerateColumn(String),

    #[error("all {0} ensemble members failed to train")]
    AllMembersFailed(usize),

    #[error("{failed} of {total} replicates failed (ceiling {ceiling})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        ceiling: f64,
    },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    /// Wraps an error with the pipeline stage it occurred in.
    pub fn at_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
