//! Crate-wide error type.
//!
//! Errors are split along the boundary the CLI cares about: everything that
//! stems from bad input files or configuration maps to exit code 1, while
//! numeric and internal failures map to exit code 2.

use thiserror::Error;

/// Errors produced by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    /// A record could not be parsed into the expected schema.
    #[error("parse error{}: {message}", fmt_line(.line))]
    Parse {
        /// 1-based line number within the input, when known.
        line: Option<usize>,
        /// What went wrong, naming the offending field where possible.
        message: String,
    },

    /// A parsed record violates a data-model invariant.
    #[error("validation error (example_id {example_id}): {message}")]
    Validation {
        /// The example the violation belongs to.
        example_id: i64,
        /// Description of the violated invariant.
        message: String,
    },

    /// A vocabulary or pipeline configuration is unusable.
    #[error("configuration error: {0}")]
    Config(String),

    /// Instance ids or shapes do not match what the operation expects.
    #[error("input error: {0}")]
    Input(String),

    /// Two record streams that must align by key do not.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// A numeric quantity left the finite range.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Training diverged.
    #[error("training error at step {step}: {message}")]
    Training {
        /// Optimizer step index at which the failure was detected.
        step: usize,
        /// Description of the failure.
        message: String,
    },

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether this error is attributable to the user's inputs (files,
    /// flags, configuration) rather than to the pipeline itself.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Numeric(_) | Error::Training { .. })
    }
}

fn fmt_line(line: &Option<usize>) -> String {
    match line {
        Some(n) => format!(" (line {n})"),
        None => String::new(),
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
