//! Experiment harness behind the `pairwise-rcd` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

use thiserror::Error;

pub use commands::Command;
pub use config::Config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] pairwise_rcd::Error),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    /// 1 for configuration problems, 2 for runtime or check failures, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        use pairwise_rcd::Error as E;
        match self {
            CliError::Config(_) | CliError::Runtime(E::Argument(_)) => 1,
            CliError::Io(_) | CliError::Runtime(E::Io(_) | E::Parse { .. }) => 3,
            CliError::Runtime(_) | CliError::Check(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        assert_eq!(CliError::Io("x".into()).exit_code(), 3);
        assert_eq!(
            CliError::Runtime(pairwise_rcd::Error::Diverged { iteration: 3 }).exit_code(),
            2
        );
        assert_eq!(
            CliError::Runtime(pairwise_rcd::Error::Argument("x".into())).exit_code(),
            1
        );
        let parse = pairwise_rcd::Error::Parse {
            line: 1,
            message: "x".into(),
        };
        assert_eq!(CliError::Runtime(parse).exit_code(), 3);
    }
}
