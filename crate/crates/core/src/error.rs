use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("steps per tau0 must be at least {min}, got {got}")]
    StepTooCoarse { got: usize, min: usize },

    #[error("integration horizon must be non-negative, got {0}")]
    HorizonNegative(f64),

    #[error("k = {k} is a multiple of {period}: cotangent pole")]
    CotangentPole { k: i64, period: usize },

    #[error("infeasible parameter request: {0}")]
    Infeasible(String),

    #[error("bound-state condition not met: {0}")]
    ConditionNotMet(String),

    #[error("operation requires {expected}, got {got}")]
    WrongCase { expected: &'static str, got: String },

    #[error("trajectory ends at t = {horizon}, field needs history up to t = {requested}")]
    HistoryTooShort { requested: f64, horizon: f64 },

    #[error("grid must be sorted ascending and finite: {0}")]
    InvalidGrid(&'static str),
}
