use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("zero-length channel or distance: {0}")]
    Degenerate(String),

    #[error("trajectory infeasible at slot {slot}: {reason}")]
    Trajectory { slot: usize, reason: String },

    #[error("gradient mismatch at slot {slot}: analytic {analytic:?} vs finite-difference {numeric:?}")]
    GradientMismatch {
        slot: usize,
        analytic: [f64; 2],
        numeric: [f64; 2],
    },

    #[error("sensing threshold unattainable at slot {slot}: max gain {max_gain:.6e} < threshold {threshold:.6e}")]
    SensingInfeasible {
        slot: usize,
        max_gain: f64,
        threshold: f64,
    },

    #[error("solver reported infeasible: {0}")]
    SolverInfeasible(String),

    #[error("not enough free slots for target {target}: need {needed}, have {available}")]
    InsufficientSlots {
        target: usize,
        needed: usize,
        available: usize,
    },

    #[error("block `{block}` failed in outer iteration {iteration}: {source}")]
    Block {
        iteration: usize,
        block: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("monotonicity breach in outer iteration {iteration}: asr {before:.9} -> {after:.9}")]
    NonMonotone {
        iteration: usize,
        before: f64,
        after: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Infeasibility errors map to a distinct CLI exit code.
    pub fn is_infeasible(&self) -> bool {
        match self {
            Error::SensingInfeasible { .. } | Error::SolverInfeasible(_) => true,
            Error::Block { source, .. } => source.is_infeasible(),
            _ => false,
        }
    }

    /// Largest attainable beampattern gain, when this is a sensing infeasibility.
    pub fn max_attainable_gain(&self) -> Option<f64> {
        match self {
            Error::SensingInfeasible { max_gain, .. } => Some(*max_gain),
            Error::Block { source, .. } => source.max_attainable_gain(),
            _ => None,
        }
    }
}
