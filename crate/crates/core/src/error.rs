use crate::recovery::BpdnSolution;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("integration diverged at t = {time}: state component exceeded {bound}")]
    IntegrationDiverged { time: f64, bound: f64 },

    #[error("trajectory too short: need index {needed}, have {available} states")]
    TrajectoryTooShort { needed: usize, available: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("denominator is zero")]
    DegenerateDenominator,

    #[error("solver stopped after {} iterations without converging", best.iterations)]
    MaxIterationsExceeded { best: Box<BpdnSolution> },

    #[error("residual bound {eta} is below the smallest achievable residual {min_residual}")]
    InfeasibleEta { eta: f64, min_residual: f64 },

    #[error("selected columns are numerically rank deficient (condition {condition:e})")]
    RankDeficientSelection { condition: f64 },

    #[error("signal is constant; correlation undefined")]
    DegenerateSignal,

    #[error("column {index} is identically zero")]
    ZeroColumn { index: usize },

    #[error("need at least two points to fit, have {points}")]
    InsufficientData { points: usize },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
