//! Local-linear-regression architecture search.
//!
//! The pipeline has three steps:
//!
//! 1. plan random single-super-block perturbations of a master network
//!    ([`plan_trials`]); each is fine-tuned externally and its accuracy
//!    recorded ([`ingest_trials`]);
//! 2. fit per-super-block pseudo-gradients mapping depth and width changes
//!    to accuracy changes ([`fit_pseudo_gradients`]);
//! 3. sample many structures, predict their accuracy, and keep the best one
//!    under a latency budget at each input resolution ([`select_best`]).
//!
//! The same pseudo-gradients serve every resolution; only the latency
//! filter changes.

mod ranges;
mod regression;
mod selection;
mod trials;

use thiserror::Error;

use crate::cost::CostError;
use crate::structure::BlockType;

pub use ranges::{body_samplers, BlockSampler, PerturbationRanges, SearchConfig, WIDTH_QUANTUM};
pub use regression::{
    accuracy_contributions, fit_pseudo_gradients, predict_accuracy, GradientEntry, PseudoGradientTable,
    FINE_GROUP_MIN_TRIALS,
};
pub use selection::{generate_candidates, run_search, select_best, winner_report_json, ResolutionOutcome, Winner};
pub use trials::{ingest_trials, plan_trials, read_trials, write_trials, TrialRecord, TRIAL_HEADER};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NasError {
    #[error("EMPTY_RANGE: no legal {field} for super-block {index}")]
    EmptyRange { index: usize, field: &'static str },
    #[error("INVALID_CONFIG: {0}")]
    InvalidConfig(String),
    #[error("MALFORMED_ROW: line {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("OUT_OF_RANGE_ACCURACY: line {line}: {value} is outside [0, 1]")]
    OutOfRangeAccuracy { line: u64, value: f64 },
    #[error("INVALID_TRIAL: row {row}: {message}")]
    InvalidTrial { row: usize, message: String },
    #[error("NO_TRIALS: no trials for super-block {index} of type {block_type}")]
    NoTrials { index: usize, block_type: BlockType },
    #[error("UNFITTED_TYPE: no pseudo-gradient for super-block {index} of type {block_type}")]
    UnfittedType { index: usize, block_type: BlockType },
    #[error("SHAPE_MISMATCH: {0}")]
    ShapeMismatch(String),
    #[error("MALFORMED_DOCUMENT: {0}")]
    MalformedDocument(String),
    #[error("NO_FEASIBLE_CANDIDATE: nothing fits the latency budget at resolution {resolution}")]
    NoFeasibleCandidate { resolution: u32 },
    #[error(transparent)]
    Cost(#[from] CostError),
}

impl NasError {
    pub fn code(&self) -> &'static str {
        match self {
            NasError::EmptyRange { .. } => "EMPTY_RANGE",
            NasError::InvalidConfig(_) => "INVALID_CONFIG",
            NasError::MalformedRow { .. } => "MALFORMED_ROW",
            NasError::OutOfRangeAccuracy { .. } => "OUT_OF_RANGE_ACCURACY",
            NasError::InvalidTrial { .. } => "INVALID_TRIAL",
            NasError::NoTrials { .. } => "NO_TRIALS",
            NasError::UnfittedType { .. } => "UNFITTED_TYPE",
            NasError::ShapeMismatch(_) => "SHAPE_MISMATCH",
            NasError::MalformedDocument(_) => "MALFORMED_DOCUMENT",
            NasError::NoFeasibleCandidate { .. } => "NO_FEASIBLE_CANDIDATE",
            NasError::Cost(e) => e.code(),
        }
    }
}
