use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("score cache is stale (cache holds a different iterate than the one supplied)")]
    StaleCache,

    #[error("iterate or risk became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("gradient descent did not reach tolerance after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("bound evaluator requires input `{0}`")]
    MissingInput(&'static str),

    #[error("run on the {which} dataset failed in repetition {rep}: {source}")]
    PairedRun {
        which: Side,
        rep: usize,
        #[source]
        source: Box<Error>,
    },
}

/// Which member of a neighboring pair a failure belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Base,
    Perturbed,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Base => f.write_str("base"),
            Side::Perturbed => f.write_str("perturbed"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
