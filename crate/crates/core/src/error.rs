use thiserror::Error;

/// Errors raised when a scenario or an operation argument violates the model's domain.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{field} must be finite (got {value})")]
    NonFinite { field: &'static str, value: f64 },

    #[error("{field} must be > 0 (got {value})")]
    NotPositive { field: &'static str, value: f64 },

    #[error("{field} must be >= 0 (got {value})")]
    Negative { field: &'static str, value: f64 },

    #[error("{field} must lie in [{min}, {max}] (got {value})")]
    OutOfRange {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("platoon distance {distance} km is outside [0, {trip_distance}] km")]
    DistanceOutOfRange { distance: f64, trip_distance: f64 },

    #[error("service fee must be >= 0 (got {0})")]
    NegativeFee(f64),

    #[error("fee grid step must be finite and > 0 (got {0})")]
    InvalidGridStep(f64),

    #[error("fee grid upper bound is not finite ({0})")]
    UnboundedFeeGrid(f64),
}

/// Errors raised while building or evaluating a parameter sweep.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("unknown sweep parameter `{0}` (valid: {valid})", valid = crate::analysis::SweepParam::ids().join(", "))]
    UnknownParam(String),

    #[error("unknown output column `{0}` (valid: {valid})", valid = crate::analysis::OutputColumn::ids().join(", "))]
    UnknownOutput(String),

    #[error("sweep axis `{0}` has no points")]
    EmptyAxis(&'static str),

    #[error("sweep axis `{param}` has a non-finite value {value}")]
    NonFiniteValue { param: &'static str, value: f64 },

    #[error("both sweep axes vary `{0}`")]
    DuplicateAxis(&'static str),

    #[error("follower subsidy share must lie in [0, 1] (got {0})")]
    InvalidSplit(f64),

    #[error("sweep point {param} = {value} gives an invalid scenario: {source}")]
    InvalidPoint {
        param: &'static str,
        value: f64,
        #[source]
        source: ModelError,
    },

    #[error(transparent)]
    Model(#[from] ModelError),
}
