use thiserror::Error;

use crate::formal::Language;
use crate::reactor::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("symbol {symbol:?} is not in the alphabet of {language}")]
    InvalidSymbol { symbol: char, language: Language },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Integration failed part way through a run; the samples recorded so far
    /// are kept for diagnostics.
    #[error("simulation failed at t = {t_s} s: {message}")]
    Simulation {
        message: String,
        t_s: f64,
        partial: Box<Trajectory>,
    },

    #[error("inconsistent chemical signals: {0}")]
    Consistency(String),

    #[error("enthalpy yield undefined: input formation enthalpy is zero")]
    UndefinedYield,

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("recipe tuning failed: {0}")]
    Tuning(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
