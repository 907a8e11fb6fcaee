//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by scenario construction, metric evaluation, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Angle outside the open interval (-90 deg, 90 deg).
    #[error("angle {0} deg outside the open interval (-90, 90)")]
    AngleOutOfRange(f64),

    /// Scenario-level validation failure (counts, powers, distinctness).
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// Inputs whose shapes do not match the scenario.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Guard against problem sizes the dense reference paths cannot handle.
    #[error("size guard: {0}")]
    SizeGuard(String),

    /// Numerical failure (factorization breakdown, eigendecomposition residual).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Invalid utility weights.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// Invalid threshold floors.
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),

    /// Scheme mode incompatible with the scenario (e.g. a comm-streams-only
    /// scheme on a scenario configured with probing streams).
    #[error("mode/scenario mismatch: {0}")]
    ModeMismatch(String),

    /// The threshold floors alone (zero slack) admit no transmit covariance.
    #[error("thresholds infeasible at zero slack: {0}")]
    ThresholdsInfeasible(String),

    /// The projection solver exhausted its iteration budget while still
    /// improving; the verdict is neither feasible nor provably infeasible.
    #[error("solver stalled after {iterations} iterations (residual {max_violation:.3e})")]
    Stalled {
        iterations: usize,
        max_violation: f64,
    },

    /// Rank-one extraction failure (zero-power communication block,
    /// indefinite residual).
    #[error("extraction failure: {0}")]
    Extraction(String),
}

pub type Result<T> = std::result::Result<T, Error>;
