//! Social processes: instantiation, role-gated triggering, group actions,
//! and migration between protocol versions.

mod executor;
mod group;
mod group_actions;
mod process;

use thiserror::Error;

use crate::ids::{CollaboratorId, EnvId, GroupId, ProcessId, RoleName, StateId, TransitionId, VersionId};
use crate::model::{ModelError, RefinementLevel};

pub use executor::{ActionContext, ActionExecutor, ActionFailure, MockExecutor};
pub use group::{Collaborator, Group};
pub use group_actions::{merge_groups, split_group};
pub use process::{
    available_transitions, check_migration, check_trigger, instantiate, migrate, outcome,
    replay_history, run_action, trigger, apply_transition_event, ActionResult, ConflictReason,
    HistoryEntry, MigrationConflict, MigrationMarker, MigrationResult, ProcessOrigin,
    ProcessOutcome, ProcessStatus, Retirement, RetireReason, SocialProcess, TransitionEvent,
};
pub(crate) use process::require_implemented;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("protocol is {0}, only implemented protocols can rule a process")]
    NotImplementedProtocol(RefinementLevel),
    #[error("{collaborator} is assigned role {role}, which the protocol does not declare")]
    UnknownRoleAssignment {
        collaborator: CollaboratorId,
        role: RoleName,
    },
    #[error("group {0} has no members")]
    EmptyGroup(GroupId),
    #[error("protocol has {0} start states; choose one")]
    AmbiguousStart(usize),
    #[error("{0} is not a start state")]
    InvalidStartChoice(StateId),
    #[error("{0} is not a member of the process group")]
    UnknownCollaborator(CollaboratorId),
    #[error("unknown transition {0}")]
    UnknownTransition(TransitionId),
    #[error("{collaborator} does not hold role {required}")]
    RoleMismatch {
        collaborator: CollaboratorId,
        required: RoleName,
    },
    #[error("transition {transition} does not leave the current state {current}")]
    WrongSourceState {
        transition: TransitionId,
        current: StateId,
    },
    #[error("process {0} has completed")]
    ProcessCompleted(ProcessId),
    #[error("process {0} was retired by a group action")]
    ProcessRetired(ProcessId),
    #[error("action of {transition} failed: {reason}")]
    ActionFailed {
        transition: TransitionId,
        reason: String,
    },
    #[error("process is ruled by {expected}, got protocol {got}")]
    WrongProtocolVersion { expected: VersionId, got: VersionId },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid merge: {0}")]
    InvalidMerge(String),
    #[error("processes follow different protocol versions ({left}, {right})")]
    ProtocolMismatch { left: VersionId, right: VersionId },
    #[error("processes are in different states ({left}, {right})")]
    StateMismatch { left: StateId, right: StateId },
    #[error("groups work in different environments ({left}, {right})")]
    EnvironmentMismatch { left: EnvId, right: EnvId },
    #[error("recorded history does not fit the process: {0}")]
    HistoryMismatch(String),
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::Model(e) => e.code(),
            EngineError::NotImplementedProtocol(_) => "NOT_IMPLEMENTED_PROTOCOL",
            EngineError::UnknownRoleAssignment { .. } => "UNKNOWN_ROLE_ASSIGNMENT",
            EngineError::EmptyGroup(_) => "EMPTY_GROUP",
            EngineError::AmbiguousStart(_) => "AMBIGUOUS_START",
            EngineError::InvalidStartChoice(_) => "INVALID_START_CHOICE",
            EngineError::UnknownCollaborator(_) => "UNKNOWN_COLLABORATOR",
            EngineError::UnknownTransition(_) => "UNKNOWN_TRANSITION",
            EngineError::RoleMismatch { .. } => "ROLE_MISMATCH",
            EngineError::WrongSourceState { .. } => "WRONG_SOURCE_STATE",
            EngineError::ProcessCompleted(_) => "PROCESS_COMPLETED",
            EngineError::ProcessRetired(_) => "PROCESS_RETIRED",
            EngineError::ActionFailed { .. } => "ACTION_FAILED",
            EngineError::WrongProtocolVersion { .. } => "WRONG_PROTOCOL_VERSION",
            EngineError::InvalidPartition(_) => "INVALID_PARTITION",
            EngineError::InvalidMerge(_) => "INVALID_MERGE",
            EngineError::ProtocolMismatch { .. } => "PROTOCOL_MISMATCH",
            EngineError::StateMismatch { .. } => "STATE_MISMATCH",
            EngineError::EnvironmentMismatch { .. } => "ENVIRONMENT_MISMATCH",
            EngineError::HistoryMismatch(_) => "HISTORY_MISMATCH",
        }
    }
}
