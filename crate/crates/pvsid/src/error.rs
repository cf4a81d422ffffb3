//! Error type shared across the crate.

use std::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by the library.
#[derive(Debug)]
pub enum Error {
    /// A precondition on an argument was violated (shape mismatch, empty
    /// input, out-of-range value, ...).
    InvalidArgument(String),
    /// A requested tip position lies outside the reachable annulus.
    OutOfWorkspace {
        /// Radius of the requested point from the shoulder, in meters.
        radius: f64,
        /// Inner and outer bounds of the reachable annulus, in meters.
        reach: (f64, f64),
    },
    /// A numeric operation failed (non-finite values, factorization failure).
    Numeric(String),
    /// Training produced a non-finite loss.
    TrainingDiverged {
        /// Last epoch that still produced a finite loss.
        last_finite_epoch: usize,
    },
    /// The controller was asked to act before its history buffers held a
    /// full past horizon.
    NotWarmedUp { have: usize, need: usize },
    /// A configuration file failed to parse or validate. `line` is 1-based;
    /// line 0 means the error is not tied to a single line.
    Config {
        line: usize,
        key: String,
        message: String,
    },
    /// A model file failed to load (version, checksum, or shape problems).
    ModelFormat(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::OutOfWorkspace { radius, reach } => write!(
                f,
                "target at radius {radius:.6} m is outside the reachable annulus [{:.6}, {:.6}] m",
                reach.0, reach.1
            ),
            Error::Numeric(msg) => write!(f, "numeric failure: {msg}"),
            Error::TrainingDiverged { last_finite_epoch } => write!(
                f,
                "training diverged (non-finite loss); last finite epoch was {last_finite_epoch}"
            ),
            Error::NotWarmedUp { have, need } => write!(
                f,
                "controller not warmed up: history holds {have} steps, needs {need}"
            ),
            Error::Config { line, key, message } => {
                if *line > 0 {
                    write!(f, "config error at line {line} (key `{key}`): {message}")
                } else {
                    write!(f, "config error (key `{key}`): {message}")
                }
            }
            Error::ModelFormat(msg) => write!(f, "model file error: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl Error {
    /// Process exit code for the CLI: 2 for validation problems, 3 for
    /// numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) | Error::TrainingDiverged { .. } => 3,
            _ => 2,
        }
    }
}
