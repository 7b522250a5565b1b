use thiserror::Error;

/// Errors raised across the crate.
///
/// The variants map onto the CLI exit codes: configuration problems exit
/// with 2, numerical failures with 3 and structural inconsistencies in the
/// detected terrace with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite value {value} of the nonlinearity at (t = {t}, u = {u})")]
    NumericalDomain { t: f64, u: f64, value: f64 },

    #[error("trajectory left the admissible range at t = {t} (last finite state {last_state})")]
    Divergence { t: f64, last_state: f64 },

    #[error("integrator exceeded {max_steps} steps before reaching t = {target}")]
    StepLimit { max_steps: usize, target: f64 },

    #[error("solution blew up at node {node} (t = {t})")]
    BlowUp { node: usize, t: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("level {lambda} is outside the profile range [{low}, {high}]")]
    LevelOutOfRange { lambda: f64, low: f64, high: f64 },

    #[error("window would need {needed} nodes, above the budget of {budget}")]
    MemoryBudget { needed: usize, budget: usize },

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("structural inconsistency: {0}")]
    Structural(String),

    #[error("drift undefined: front speed {speed} is below {floor}")]
    DriftUndefined { speed: f64, floor: f64 },

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } => 2,
            Error::Structural(_) => 4,
            Error::Io { .. } | Error::Serde(_) => 1,
            _ => 3,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
