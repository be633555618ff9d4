use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state diverged at t = {time}")]
    Divergence { time: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parameters not yet identifiable: {0}")]
    NotIdentifiable(String),
    #[error("window too short: need {needed} s of history, have {available} s")]
    WindowTooShort { needed: f64, available: f64 },
    #[error("no certified parameter ordering")]
    NoCertifiedOrdering,
    #[error("no Γ scaling matched the averaged system within {attempts} attempts")]
    NoGammaMatch { attempts: usize },
    #[error("assumption 2 fails: {0}")]
    AssumptionFailure(String),
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("level outside operating box: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
