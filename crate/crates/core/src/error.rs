use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid payoff: {0}")]
    InvalidPayoff(String),

    #[error("invalid instrument set: {0}")]
    InvalidInstruments(String),

    #[error("path count {paths} exceeds the configured cap of {cap}")]
    SizeLimit { paths: u128, cap: u64 },

    #[error("malformed linear program: {0}")]
    MalformedLp(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("no admissible martingale measure exists on the grid")]
    NoAdmissibleMeasure,

    #[error("static arbitrage in call strip: {0}")]
    StaticArbitrage(String),

    #[error("call strip implies mass outside the grid: {0}")]
    OffGridMass(String),

    #[error("strikes are not aligned with the grid levels: {0}")]
    MisalignedStrikes(String),

    #[error("invalid marginal: {0}")]
    InvalidMarginal(String),

    #[error("payoff is not convex along the levels: {0}")]
    NotConvex(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("measure is not a martingale measure: {0}")]
    NotAMartingale(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("cannot parse input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
