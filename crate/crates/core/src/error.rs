use std::fmt;

use thiserror::Error;

/// One problem found while validating a configuration, addressed by its dotted key path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("step-size error: {0}")]
    StepSize(String),

    #[error("no root in detuning bracket: ratio {lower_ratio:e} at {lower_nm} nm, {upper_ratio:e} at {upper_nm} nm")]
    Bracket {
        lower_nm: f64,
        upper_nm: f64,
        lower_ratio: f64,
        upper_ratio: f64,
    },

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("invalid config:\n{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("input error in {path}: {message}")]
    Input { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  - {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    /// Process exit code: 2 for configuration and input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input { .. } | Error::Io(_) | Error::Domain(_) => 2,
            Error::StepSize(_) => 2,
            Error::Grid(_) | Error::Bracket { .. } | Error::IllConditioned(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
