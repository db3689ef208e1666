//! The community's protocol repository: versions and their lineage,
//! visibility scopes, the three propagation strategies, cross-environment
//! adoption, and history queries.

mod adoption;
mod pvc;
mod repository;

use thiserror::Error;

use crate::engine::EngineError;
use crate::ids::{ActionName, EnvId, GroupId, VersionId};
use crate::model::ModelError;

pub use adoption::{adopt_cross_environment, Adoption};
pub use pvc::{catalog_for, propagate, CatalogEntry, PropagationReport, PvcState};
pub use repository::{LineageEdge, LineageHop, PropagationStrategy, ProtocolRepository, Scope};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InheritanceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("unknown version {0}")]
    UnknownVersion(VersionId),
    #[error("version {0} has already been published")]
    NotPrivate(VersionId),
    #[error("version {0} has no parent to propagate over")]
    NoParent(VersionId),
    #[error("adapted protocol is not acceptable: {0}")]
    AdaptationInvalid(String),
    #[error("unknown group {0}")]
    UnknownGroup(GroupId),
    #[error("unknown environment {0}")]
    UnknownEnvironment(EnvId),
    #[error("{uri} is not offered for {action} by the environment")]
    BindingNotInEnvironment { action: ActionName, uri: String },
    #[error("no unbound transition uses action {0}")]
    UnknownAction(ActionName),
    #[error("roles without collaborators: {}", .0.join(", "))]
    RoleBindingMissing(Vec<String>),
    #[error("linking {parent} -> {child} would close a cycle")]
    LineageCycle { parent: VersionId, child: VersionId },
    #[error("unknown propagation strategy {0:?}")]
    UnknownStrategy(String),
}

impl InheritanceError {
    pub fn code(&self) -> &'static str {
        match self {
            InheritanceError::Model(e) => e.code(),
            InheritanceError::Engine(e) => e.code(),
            InheritanceError::UnknownVersion(_) => "UNKNOWN_VERSION",
            InheritanceError::NotPrivate(_) => "NOT_PRIVATE",
            InheritanceError::NoParent(_) => "NO_PARENT",
            InheritanceError::AdaptationInvalid(_) => "ADAPTATION_INVALID",
            InheritanceError::UnknownGroup(_) => "UNKNOWN_GROUP",
            InheritanceError::UnknownEnvironment(_) => "UNKNOWN_ENVIRONMENT",
            InheritanceError::BindingNotInEnvironment { .. } => "BINDING_NOT_IN_ENVIRONMENT",
            InheritanceError::UnknownAction(_) => "UNKNOWN_ACTION",
            InheritanceError::RoleBindingMissing(_) => "ROLE_BINDING_MISSING",
            InheritanceError::LineageCycle { .. } => "LINEAGE_CYCLE",
            InheritanceError::UnknownStrategy(_) => "UNKNOWN_STRATEGY",
        }
    }
}
