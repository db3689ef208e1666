//! Protocol values at every refinement level and the pure operations on
//! them: validation, implementation, abstraction, patching, diffing, and
//! environment compatibility.

mod canonical;
mod env;
mod patch;
mod refine;
mod types;
mod validate;

use thiserror::Error;

use crate::ids::{RoleName, TransitionId, VersionId};

pub use canonical::{Structure, StructuralTransition};
pub use env::{check_environment_compatibility, Compatibility, Environment};
pub use patch::{apply_patch, diff, PatchEdit, ProtocolDiff, ProtocolPatch};
pub use refine::{extract_abstract, implement, refinement_level};
pub(crate) use refine::level_unchecked;
pub use types::{
    ActionSpec, Endpoint, Outcome, RefinementLevel, RoleBinding, SocialProtocol, StateKind,
    StateNode, Transition,
};
pub use validate::{can_terminate_from, validate_structure, Finding, FindingCode, Severity, ValidationReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("protocol is structurally invalid: {0}")]
    InvalidProtocol(String),
    #[error("unknown role {0}")]
    UnknownRole(RoleName),
    #[error("unknown transition {0}")]
    UnknownTransition(TransitionId),
    #[error("{0:?} is not an absolute URI")]
    InvalidUri(String),
    #[error("role binding for {0} names no collaborators")]
    EmptyRoleBinding(RoleName),
    #[error("a patch needs at least one edit")]
    EmptyPatch,
    #[error("edit #{edit_index} references {target}, removed by an earlier edit")]
    InconsistentPatch { edit_index: usize, target: String },
    #[error("edit #{edit_index} targets missing {target}")]
    PatchTargetMissing { edit_index: usize, target: String },
    #[error("{0} already exists")]
    DuplicateId(String),
    #[error("declared version {declared} does not match content hash {computed}")]
    VersionMismatch {
        declared: VersionId,
        computed: VersionId,
    },
    #[error("malformed document: {0}")]
    Parse(String),
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::InvalidProtocol(_) => "INVALID_PROTOCOL",
            ModelError::UnknownRole(_) => "UNKNOWN_ROLE",
            ModelError::UnknownTransition(_) => "UNKNOWN_TRANSITION",
            ModelError::InvalidUri(_) => "INVALID_URI",
            ModelError::EmptyRoleBinding(_) => "EMPTY_ROLE_BINDING",
            ModelError::EmptyPatch => "EMPTY_PATCH",
            ModelError::InconsistentPatch { .. } => "INCONSISTENT_PATCH",
            ModelError::PatchTargetMissing { .. } => "PATCH_TARGET_MISSING",
            ModelError::DuplicateId(_) => "DUPLICATE_ID",
            ModelError::VersionMismatch { .. } => "VERSION_MISMATCH",
            ModelError::Parse(_) => "PARSE_ERROR",
        }
    }
}
