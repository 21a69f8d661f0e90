use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    /// Ill-formed input: bad set relations, bad permutations, dimension mismatches.
    #[error("structural error: {0}")]
    Structural(String),
    /// The instance does not belong to the class an operation requires.
    #[error("classification error: {0}")]
    Classification(String),
    #[error("universe of {n} variables exceeds the cap of {cap}")]
    Size { n: usize, cap: usize },
    #[error("witness violation: {0}")]
    Witness(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error("proof generation fault at step {step}: {reason}")]
    Generation { step: usize, reason: String },
    #[error("malformed proof step {step}: {reason}")]
    ProofStructure { step: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
