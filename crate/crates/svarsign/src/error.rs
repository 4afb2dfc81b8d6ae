use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("restriction file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid restriction set: {0}")]
    InvalidRestrictions(String),

    #[error("insufficient observations: need more than {needed}, got {got}")]
    InsufficientObservations { needed: usize, got: usize },

    #[error("regressor matrix is rank deficient")]
    RankDeficient,

    #[error("could not draw a restriction-consistent impact matrix within {0} attempts")]
    InfeasibleImpact(usize),

    #[error("candidate cap of {cap} exhausted after {admissible} admissible draws")]
    CapExhausted { cap: u64, admissible: u64 },

    #[error("enumeration limit of {0} admissible assignments exceeded")]
    EnumerationLimit(usize),

    #[error("restriction horizon {h} exceeds impulse-response horizon {max}")]
    HorizonExceeded { h: usize, max: usize },

    #[error("restriction set does not satisfy the identifiability assumptions: {0}")]
    AssumptionViolated(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
