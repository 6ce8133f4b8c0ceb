use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rank {rank} out of range 1..={count}")]
    RankOutOfRange { rank: usize, count: usize },

    #[error("site {site} out of range 1..={size}")]
    SiteOutOfRange { site: usize, size: usize },

    #[error("site {0} is not occupied")]
    UnoccupiedSite(usize),

    #[error("configuration is not ergodic (two adjacent empty sites)")]
    NotErgodic,

    #[error("infeasible sizes n={n}, k={k}: {reason}")]
    Infeasible { n: usize, k: usize, reason: &'static str },

    #[error("state space of {states} exceeds the guard of {limit}")]
    SizeGuard { states: u128, limit: u128 },

    #[error("malformed height profile: {0}")]
    InvalidHeight(String),

    #[error("profiles are not ordered pointwise at site {0}")]
    OrderViolation(usize),

    #[error("distributions live on different index sets ({0} vs {1})")]
    MismatchedSupport(usize, usize),

    #[error("non-finite time {0}")]
    NonFinite(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
