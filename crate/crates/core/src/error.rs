use std::io;

/// Errors produced by kernel construction, expression handling, SVM training
/// and the evaluation protocol.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for size {len}")]
    Index { index: usize, len: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("repeat {index} failed: {source}")]
    Repeat {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
