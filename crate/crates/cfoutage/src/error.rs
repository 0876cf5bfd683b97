use std::fmt;

/// Failure of a run, mapped onto the process exit code.
#[derive(Debug)]
pub enum AppError {
    Config(String),
    Numerical(cfoutage_core::error::Error),
    Io(std::io::Error),
    /// A self-check ran to completion and did not meet its tolerance.
    Acceptance(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Io(_) => 1,
            AppError::Config(_) => 2,
            AppError::Numerical(_) => 3,
            AppError::Acceptance(_) => 4,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "config error {m}"),
            AppError::Numerical(e) => write!(f, "numerical failure: {e}"),
            AppError::Io(e) => write!(f, "io error: {e}"),
            AppError::Acceptance(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl std::error::Error for AppError {}

impl From<cfoutage_core::error::Error> for AppError {
    fn from(e: cfoutage_core::error::Error) -> Self {
        if e.is_numerical() {
            AppError::Numerical(e)
        } else {
            AppError::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e)
    }
}

impl From<csv::Error> for AppError {
    fn from(e: csv::Error) -> Self {
        AppError::Io(e.into())
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::Io(e.into())
    }
}
