use thiserror::Error;

/// Errors split into two families so the CLI can map them onto exit codes:
/// precondition violations (exit 2) and verification failures (exit 3).
#[derive(Debug, Error)]
pub enum GmtError {
    #[error("scale finer than representation: requested 2^-{requested}, set lives at 2^-{level}")]
    ScaleFinerThanRepresentation { requested: u32, level: u32 },

    #[error("empty set: {0}")]
    EmptySet(&'static str),

    #[error("renormalizing empty intersection")]
    EmptyRenormalization,

    #[error("level {level} not divisible by step {step}")]
    LevelNotDivisible { level: u32, step: u32 },

    #[error("step {step} below threshold: uniformization with epsilon {epsilon} requires step >= {required}")]
    StepBelowThreshold {
        step: u32,
        required: u32,
        epsilon: String,
    },

    #[error("parameter out of range: {0}")]
    ParameterRange(String),

    #[error("hypothesis violated: {condition} fails at x = {witness}")]
    HypothesisViolated { condition: String, witness: String },

    #[error("stage scale 2^-{requested} is not on the stage grid (step {step}, {stages} stages)")]
    OffStageGrid {
        requested: u32,
        step: u32,
        stages: usize,
    },

    #[error("empty polygon: no feasible vertex")]
    EmptyPolygon,

    #[error("mismatched levels: {0}")]
    LevelMismatch(String),

    #[error("infeasible dyadic realization: {reason}; nearest feasible: {suggestion}")]
    InfeasibleRealization { reason: String, suggestion: String },

    #[error("duplicate cell in input: {0}")]
    DuplicateCell(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl GmtError {
    /// CLI exit code contract: 2 for precondition errors, 3 for verification failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            GmtError::VerificationFailed(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, GmtError>;
