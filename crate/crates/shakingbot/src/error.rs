use thiserror::Error;

/// Errors surfaced by the simulator, perception stack, and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bag spec: field `{field}`: {reason}")]
    InvalidSpec { field: &'static str, reason: String },

    #[error("simulation diverged at step {step}: non-finite position")]
    SimulationDiverged { step: u64 },

    #[error("no particle within {radius} m of grasp point")]
    GraspMiss { radius: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("attachment is not active")]
    AttachmentNotActive,

    #[error("trajectory rejected: {0}")]
    TrajectoryRejected(String),

    #[error("bag state invariant violated: {0}")]
    InvariantViolation(String),

    #[error("handle detection failed: {0}")]
    HandleDetectionFailed(String),

    #[error("raster shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("insertion infeasible: {0}")]
    InsertionInfeasible(String),

    #[error("tier generation failed for seed {seed} after {attempts} attempts")]
    TierGenerationFailed { seed: u64, attempts: u32 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
