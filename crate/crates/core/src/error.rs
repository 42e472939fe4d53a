use thiserror::Error;

use crate::track::{BranchId, TrackError};

/// Failures raised by the analysis stages.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Track(#[from] TrackError),

    #[error("fold at {pivot} is not possible: {diagnostic}")]
    NotFoldable { pivot: BranchId, diagnostic: String },

    #[error("folding sequence rejected at layer {layer}: {reason}")]
    InvalidSequence { layer: usize, reason: String },

    #[error("not pseudo-Anosov-like: {0}")]
    NonPseudoAnosovInput(String),

    #[error("veering pattern violated: {0}")]
    VeeringViolation(String),

    #[error("flow graph component structure violated: {0}")]
    StructureViolation(String),

    #[error("dynamic and wall-dual infinitesimal sets differ: {0}")]
    CharacterizationMismatch(String),

    #[error("infinitesimal structure check failed: {0}")]
    LemmaViolation(String),

    #[error("contracted switch angle data invalid: {0}")]
    AngleStructureViolation(String),

    #[error("induced path invalid: {0}")]
    PathInvalid(String),

    #[error("transition matrix not irreducible: {0}")]
    NotIrreducible(String),
}

impl Error {
    /// True for failures that can only come from a defect in this library
    /// rather than from bad input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Error::CharacterizationMismatch(_)
                | Error::LemmaViolation(_)
                | Error::AngleStructureViolation(_)
                | Error::PathInvalid(_)
                | Error::NotIrreducible(_)
        )
    }
}

impl Error {
    /// Name of the pipeline stage that raises this error.
    pub fn stage(&self) -> &'static str {
        match self {
            Error::Track(_) => "track",
            Error::NotFoldable { .. } | Error::InvalidSequence { .. } => "validate",
            Error::NonPseudoAnosovInput(_) => "gate",
            Error::VeeringViolation(_) => "veering",
            Error::StructureViolation(_) => "flow graph",
            Error::CharacterizationMismatch(_) | Error::LemmaViolation(_) => "walls",
            Error::AngleStructureViolation(_) | Error::PathInvalid(_) => "contraction",
            Error::NotIrreducible(_) => "certificate",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
