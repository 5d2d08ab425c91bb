//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("empty point set")]
    EmptyPointSet,
    #[error("trajectory length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("timestamp count {0} does not match pose count {1}")]
    TimestampMismatch(usize, usize),
    #[error("timestamps must be strictly increasing")]
    NonIncreasingTimestamps,
    #[error("track time steps differ: {0} vs {1}")]
    DtMismatch(f64, f64),
    #[error("tracks are not time-aligned")]
    TrackMisaligned,
    #[error("invalid time step: {0}")]
    InvalidDt(f64),

    #[error("shape mismatch: expected {expected}, got {got} in {ctx}")]
    ShapeMismatch {
        ctx: &'static str,
        expected: String,
        got: String,
    },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("zero-norm vector in {0}")]
    ZeroNorm(&'static str),
    #[error("unknown parameter: {0}")]
    UnknownParam(String),
    #[error("learning-rate step {step} outside schedule of {total} steps")]
    StepOutOfRange { step: usize, total: usize },
    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("empty token sequence")]
    EmptyTokens,
    #[error("empty caption list")]
    EmptyCaptions,
    #[error("empty context database")]
    EmptyDatabase,
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch sizes differ: {0} vs {1}")]
    BatchMismatch(usize, usize),
    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),

    #[error("empty dataset")]
    EmptyDataset,
    #[error("dataset corrupt: {0}")]
    DatasetCorrupt(String),
    #[error("checkpoint corrupt: {0}")]
    CheckpointCorrupt(String),
    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(String),

    #[error("bad config: {0}")]
    BadConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
