use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation too small for |alpha| = {amplitude}: n_trunc = {given}, rule requires n_trunc >= {required}")]
    Truncation {
        amplitude: f64,
        given: usize,
        required: usize,
    },

    #[error("fock layout needs {amplitudes} amplitudes (n_trunc = {required_n_trunc} per mode), over the memory budget of {budget}")]
    MemoryBudget {
        amplitudes: usize,
        required_n_trunc: usize,
        budget: usize,
    },

    #[error("near-null state ({what}): norm^2 = {norm_sq:e}")]
    NearNull { what: String, norm_sq: f64 },

    #[error("measurement outcome {outcome} is impossible (probability {probability:e})")]
    OutcomeImpossible { outcome: String, probability: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index {index} out of range (len {len})")]
    InvalidIndex { index: usize, len: usize },

    #[error("operation requires atoms to be present in the state")]
    AtomsAbsent,

    #[error("operation requires the atoms to be measured out first")]
    AtomsPresent,

    #[error("operator is not Hermitian (max |H - H^dag| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("inconsistent gate timing: {0}")]
    InconsistentTiming(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("no bit-flip route from {from} to {to}")]
    NoRoute { from: String, to: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed state dump: {0}")]
    Dump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 physics guard, 4 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::UnknownLabel(_)
            | Error::InvalidParameter(_)
            | Error::Dump(_)
            | Error::Json(_)
            | Error::Io(_) => 2,
            Error::Truncation { .. }
            | Error::MemoryBudget { .. }
            | Error::NearNull { .. }
            | Error::OutcomeImpossible { .. }
            | Error::InconsistentTiming(_) => 3,
            _ => 4,
        }
    }
}
