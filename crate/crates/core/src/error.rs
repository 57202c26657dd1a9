use thiserror::Error;

/// Side of the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Running variable strictly below the cutoff (untreated).
    Left,
    /// Running variable at or above the cutoff (treated).
    Right,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Left => f.write_str("left"),
            Side::Right => f.write_str("right"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),

    #[error("density at the cutoff must be positive, got {0}")]
    InvalidDensity(f64),

    #[error("singular design (condition estimate {condition:.3e}); offending columns: {}", columns.join(", "))]
    SingularDesign { columns: Vec<String>, condition: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("insufficient support on the {side} side: {found} points with positive weight, need {required}")]
    InsufficientSupport {
        side: Side,
        found: usize,
        required: usize,
    },

    #[error("no observations with positive weight on the {side} side of the cutoff")]
    OneSidedData { side: Side },

    #[error("no observations within bandwidth {h} of the cutoff")]
    NoSupport { h: f64 },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("line {line}, column `{column}`: {message}")]
    Ingest {
        line: usize,
        column: String,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse error classes, each mapped to a process exit code by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    Usage,
    Ingestion,
    Numerical,
    InsufficientSupport,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage => 2,
            ErrorCategory::Ingestion => 3,
            ErrorCategory::Numerical => 4,
            ErrorCategory::InsufficientSupport => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Usage => "usage",
            ErrorCategory::Ingestion => "ingestion",
            ErrorCategory::Numerical => "numerical",
            ErrorCategory::InsufficientSupport => "insufficient_support",
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidKernel(_)
            | Error::Range(_)
            | Error::InvalidBandwidth(_)
            | Error::Config(_) => ErrorCategory::Usage,
            Error::InvalidData(_) | Error::Ingest { .. } | Error::Io(_) => {
                ErrorCategory::Ingestion
            }
            Error::SingularDesign { .. } | Error::Singular(_) | Error::InvalidDensity(_) => {
                ErrorCategory::Numerical
            }
            Error::InsufficientSupport { .. }
            | Error::OneSidedData { .. }
            | Error::NoSupport { .. } => ErrorCategory::InsufficientSupport,
        }
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::range(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(h))
    }
}
