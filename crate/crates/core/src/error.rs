use thiserror::Error;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("configuration error at line {line}: {message}")]
    ConfigLine { line: usize, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    /// No age-0 region can take the allocation; the caller must collect.
    #[error("GC required")]
    GcRequired,

    #[error("heap exhausted: {0}")]
    HeapExhausted(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("trace parse error at line {line}: {message}")]
    TraceParse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SimError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) | SimError::ConfigLine { .. } | SimError::TraceParse { .. } => 1,
            SimError::Usage(_) | SimError::GcRequired | SimError::HeapExhausted(_) | SimError::Invariant(_) => 2,
            SimError::Io(_) | SimError::Csv(_) => 3,
        }
    }
}
