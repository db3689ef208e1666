use thiserror::Error;

use crate::engine::{EngineError, MigrationConflict};
use crate::inheritance::{InheritanceError, PropagationReport};
use crate::model::ModelError;
use crate::negotiation::NegotiationError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ServerError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Negotiation(#[from] NegotiationError),
    #[error(transparent)]
    Inheritance(#[from] InheritanceError),
    #[error("unknown process {0}")]
    UnknownProcess(String),
    #[error("unknown negotiation session {0}")]
    UnknownSession(String),
    #[error("process {0} already exists")]
    ProcessExists(String),
    #[error("group {0} already exists")]
    GroupExists(String),
    #[error("environment {0} already exists")]
    EnvironmentExists(String),
    #[error("session {0} already exists")]
    SessionExists(String),
    #[error("environment lists no endpoint for {0}")]
    EmptyService(String),
    #[error("migration conflicts with the current state {} of {}", .0.state, .0.process_id)]
    MigrationConflict(MigrationConflict),
    #[error("instant propagation aborted: {} conflicting process(es)", .0.conflicts.len())]
    PropagationConflict(Box<PropagationReport>),
    #[error("not allowed: {0}")]
    Forbidden(String),
    #[error("missing X-Collaborator identity header")]
    MissingIdentity,
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("event payload does not match its kind: {0}")]
    SchemaInvalid(String),
    #[error("storage failure: {0}")]
    StorageFailure(String),
    #[error("corrupt event log: {0}")]
    CorruptLog(String),
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("data directory is not writable: {0}")]
    DataDirUnwritable(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("script line {line}: {message}")]
    ScriptParse { line: usize, message: String },
}

impl ServerError {
    pub fn code(&self) -> &'static str {
        match self {
            ServerError::Model(e) => e.code(),
            ServerError::Engine(e) => e.code(),
            ServerError::Negotiation(e) => e.code(),
            ServerError::Inheritance(e) => e.code(),
            ServerError::UnknownProcess(_) => "UNKNOWN_PROCESS",
            ServerError::UnknownSession(_) => "UNKNOWN_SESSION",
            ServerError::ProcessExists(_) => "PROCESS_EXISTS",
            ServerError::GroupExists(_) => "GROUP_EXISTS",
            ServerError::EnvironmentExists(_) => "ENVIRONMENT_EXISTS",
            ServerError::SessionExists(_) => "SESSION_EXISTS",
            ServerError::EmptyService(_) => "EMPTY_SERVICE",
            ServerError::MigrationConflict(_) => "MIGRATION_CONFLICT",
            ServerError::PropagationConflict(_) => "PROPAGATION_CONFLICT",
            ServerError::Forbidden(_) => "FORBIDDEN",
            ServerError::MissingIdentity => "MISSING_IDENTITY",
            ServerError::BadRequest(_) => "BAD_REQUEST",
            ServerError::NotFound(_) => "NOT_FOUND",
            ServerError::SchemaInvalid(_) => "SCHEMA_INVALID",
            ServerError::StorageFailure(_) => "STORAGE_FAILURE",
            ServerError::CorruptLog(_) => "CORRUPT_LOG",
            ServerError::PortInUse(_) => "PORT_IN_USE",
            ServerError::DataDirUnwritable(_) => "DATA_DIR_UNWRITABLE",
            ServerError::InvalidConfig(_) => "INVALID_CONFIG",
            ServerError::ScriptParse { .. } => "SCRIPT_PARSE_ERROR",
        }
    }

    /// HTTP status for this error's code.
    pub fn http_status(&self) -> u16 {
        status_for(self.code())
    }

    /// Structured detail attached to the error body, if any.
    pub fn details(&self) -> Option<serde_json::Value> {
        match self {
            ServerError::MigrationConflict(c) => serde_json::to_value(c).ok(),
            ServerError::PropagationConflict(report) => serde_json::to_value(report).ok(),
            ServerError::Negotiation(NegotiationError::AdaptationConflict(c)) => serde_json::to_value(c).ok(),
            _ => None,
        }
    }
}

/// Every error code the service can return, with its HTTP status.
pub const ERROR_STATUS: &[(&str, u16)] = &[
    // malformed input
    ("PARSE_ERROR", 400),
    ("BAD_REQUEST", 400),
    ("SCHEMA_INVALID", 400),
    ("EMPTY_PATCH", 400),
    ("INCONSISTENT_PATCH", 400),
    ("INVALID_URI", 400),
    ("INVALID_RULE", 400),
    ("UNKNOWN_STRATEGY", 400),
    ("INVALID_PARTITION", 400),
    ("INVALID_MERGE", 400),
    ("AMBIGUOUS_START", 400),
    ("INVALID_START_CHOICE", 400),
    ("EMPTY_ROLE_BINDING", 400),
    ("EMPTY_GROUP", 400),
    ("EMPTY_SERVICE", 400),
    ("VERSION_MISMATCH", 400),
    ("SCRIPT_PARSE_ERROR", 400),
    ("INVALID_CONFIG", 400),
    // identity and permission
    ("MISSING_IDENTITY", 401),
    ("ROLE_MISMATCH", 403),
    ("NOT_PARTICIPANT", 403),
    ("UNKNOWN_COLLABORATOR", 403),
    ("FORBIDDEN", 403),
    // missing resources
    ("NOT_FOUND", 404),
    ("UNKNOWN_VERSION", 404),
    ("UNKNOWN_PROCESS", 404),
    ("UNKNOWN_SESSION", 404),
    ("UNKNOWN_GROUP", 404),
    ("UNKNOWN_ENVIRONMENT", 404),
    ("UNKNOWN_PROPOSAL", 404),
    ("UNKNOWN_TRANSITION", 404),
    // conflicts with current state
    ("WRONG_SOURCE_STATE", 409),
    ("PROCESS_COMPLETED", 409),
    ("PROCESS_RETIRED", 409),
    ("WRONG_PROTOCOL_VERSION", 409),
    ("PROTOCOL_MISMATCH", 409),
    ("STATE_MISMATCH", 409),
    ("ENVIRONMENT_MISMATCH", 409),
    ("SESSION_CLOSED", 409),
    ("SESSION_OPEN", 409),
    ("PROPOSAL_SUPERSEDED", 409),
    ("VOTING_INCOMPLETE", 409),
    ("NEGOTIATION_IN_PROGRESS", 409),
    ("HISTORY_ALREADY_RECORDED", 409),
    ("ADAPTATION_CONFLICT", 409),
    ("MIGRATION_CONFLICT", 409),
    ("PROPAGATION_CONFLICT", 409),
    ("NOT_PRIVATE", 409),
    ("NO_PARENT", 409),
    ("DUPLICATE_ID", 409),
    ("LINEAGE_CYCLE", 409),
    ("PROCESS_EXISTS", 409),
    ("GROUP_EXISTS", 409),
    ("ENVIRONMENT_EXISTS", 409),
    ("SESSION_EXISTS", 409),
    // well-formed but semantically unacceptable
    ("INVALID_PROTOCOL", 422),
    ("NOT_IMPLEMENTED_PROTOCOL", 422),
    ("ADAPTATION_INVALID", 422),
    ("UNKNOWN_ROLE", 422),
    ("UNKNOWN_ROLE_ASSIGNMENT", 422),
    ("PATCH_TARGET_MISSING", 422),
    ("BINDING_NOT_IN_ENVIRONMENT", 422),
    ("UNKNOWN_ACTION", 422),
    ("ROLE_BINDING_MISSING", 422),
    // the remote action failed
    ("ACTION_FAILED", 502),
    // server side
    ("HISTORY_MISMATCH", 500),
    ("STORAGE_FAILURE", 500),
    ("CORRUPT_LOG", 500),
    ("PORT_IN_USE", 500),
    ("DATA_DIR_UNWRITABLE", 500),
];

pub fn status_for(code: &str) -> u16 {
    ERROR_STATUS
        .iter()
        .find(|(c, _)| *c == code)
        .map_or(500, |(_, status)| *status)
}
