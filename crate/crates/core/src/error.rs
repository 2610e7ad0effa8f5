use thiserror::Error;

/// Errors produced by the compute modules and the experiment driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid momentum mesh: {0}")]
    InvalidMesh(String),

    #[error("band index {band} out of range for a {orbitals}-band model")]
    InvalidBand { band: usize, orbitals: usize },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("region does not match the lattice: {0}")]
    RegionMismatch(String),

    #[error("dispersion is flat along the step axis; supply the window half-width explicitly")]
    FlatBand,

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fit rejected: {0}")]
    Fit(String),

    #[error("correlations do not decay exponentially: {0}")]
    NotGapped(String),

    #[error("drive: {0}")]
    Drive(String),

    #[error("config validation failed:\n{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A single config validation failure, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl ConfigIssue {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T> = std::result::Result<T, Error>;
