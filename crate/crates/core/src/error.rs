use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid history: {0}")]
    InvalidHistory(String),

    #[error("evaluation point {point} outside [{lo}, {hi}]")]
    OutOfDomain { point: f64, lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("maturation threshold not reached before s = {horizon}; speed-field conditions are violated")]
    ThresholdNotReached { horizon: f64 },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("positivity violated at t = {t}: component {component} = {value}")]
    PositivityViolated {
        t: f64,
        component: usize,
        value: f64,
    },

    #[error("sample {index} is not on the domain boundary (closest component distance {distance})")]
    NotOnBoundary { index: usize, distance: f64 },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
