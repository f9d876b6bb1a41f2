use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {t} outside [0, {t_end}]")]
    OutOfRange { t: f64, t_end: f64 },

    #[error("numerical blowup at step {step}{}", path_suffix(*.path))]
    NumericalBlowup { step: usize, path: Option<usize> },

    #[error("clock exhausted before reaching time {target} (clock max {reached}){}", path_suffix(*.path))]
    ClockExhausted {
        target: f64,
        reached: f64,
        path: Option<usize>,
    },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("paths are on different grids")]
    GridMismatch,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("time {t} beyond ensemble horizon {horizon}")]
    Horizon { t: f64, horizon: f64 },

    #[error("empty sample")]
    EmptySample,
}

fn path_suffix(path: Option<usize>) -> String {
    match path {
        Some(i) => format!(" in path {i}"),
        None => String::new(),
    }
}

impl Error {
    /// Attach the index of the path that produced this error.
    pub fn at_path(self, index: usize) -> Self {
        match self {
            Error::NumericalBlowup { step, .. } => Error::NumericalBlowup {
                step,
                path: Some(index),
            },
            Error::ClockExhausted { target, reached, .. } => Error::ClockExhausted {
                target,
                reached,
                path: Some(index),
            },
            other => other,
        }
    }

    pub fn path_index(&self) -> Option<usize> {
        match self {
            Error::NumericalBlowup { path, .. } | Error::ClockExhausted { path, .. } => *path,
            _ => None,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
