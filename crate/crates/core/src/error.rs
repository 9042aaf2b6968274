//! Error type shared by all analysis modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building or analysing a chain.
///
/// Validation failures (`NegativeEntry`, `RowSumDefect`, ...) make a chain
/// unusable for every downstream operation; numerical failures carry enough
/// context to diagnose the offending solve.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("negative entry {value} in {location}")]
    NegativeEntry { location: String, value: f64 },

    #[error("non-finite entry in {location}")]
    NonFiniteEntry { location: String },

    #[error("row-sum defect {defect:+e} in {level_class}")]
    RowSumDefect { level_class: String, defect: f64 },

    #[error("phase process is reducible (positivity pattern not strongly connected)")]
    ReduciblePhaseProcess,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("tail law invalid: {0}")]
    InvalidTailLaw(String),

    #[error("mean level increment undefined: {0}")]
    DriftUndefined(String),

    #[error("argument z = {z} outside the domain {domain}")]
    OutOfDomain { z: f64, domain: String },

    #[error("iteration failed to converge after {iterations} steps (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("no geometric regime: min upward radius {radius} is not > 1")]
    NotGeometricRegime { radius: f64 },

    #[error("chain is not positive recurrent: {0}")]
    NotPositiveRecurrent(String),

    #[error("drift certificate violated at level {level}, phase {phase} (margin {margin:e})")]
    CertificateViolated {
        level: usize,
        phase: usize,
        margin: f64,
    },

    #[error("phase process is stochastic; no strong-ergodicity certificate exists")]
    PhaseStochastic,

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("horizon too short: fit window of the total-variation curve is empty")]
    HorizonTooShort,

    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),

    #[error("chain spec parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for defects in the chain description itself, as opposed to
    /// numerical failures of an analysis.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NegativeEntry { .. }
                | Error::NonFiniteEntry { .. }
                | Error::RowSumDefect { .. }
                | Error::ReduciblePhaseProcess
                | Error::DimensionMismatch(_)
                | Error::InvalidTailLaw(_)
                | Error::Parse(_)
        )
    }
}
