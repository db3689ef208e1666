//! Negotiated adaptation: proposals, counter-proposals, votes, the atomic
//! close that turns an accepted patch into a new protocol version, and the
//! consent-aware history record.

mod close;
mod record;
mod session;

use thiserror::Error;

use crate::engine::{EngineError, MigrationConflict};
use crate::ids::{CollaboratorId, ProcessId, ProposalId, SessionId};
use crate::inheritance::InheritanceError;
use crate::model::ModelError;

pub use close::{close_negotiation, CloseOutcome};
pub use record::{record_history, withheld, NegotiationRecord, RecordView};
pub use session::{
    cast_vote, decide, open_negotiation, propose_amendment, set_consent, withdraw,
    AcceptanceRule, Decision, NegotiationSession, Proposal, SessionStatus, Tally, Vote, VoteValue,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NegotiationError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Inheritance(#[from] InheritanceError),
    #[error("session {0} is closed")]
    SessionClosed(SessionId),
    #[error("session {0} is still open")]
    SessionOpen(SessionId),
    #[error("{0} is not a participant")]
    NotParticipant(CollaboratorId),
    #[error("unknown proposal {0}")]
    UnknownProposal(ProposalId),
    #[error("proposal {0} has been superseded")]
    ProposalSuperseded(ProposalId),
    #[error("not everyone voted on {proposal}: waiting for {}", pending.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", "))]
    VotingIncomplete {
        proposal: ProposalId,
        pending: Vec<CollaboratorId>,
    },
    #[error("accepted patch cannot be applied to the running process: {} in {}", .0.process_id, .0.state)]
    AdaptationConflict(MigrationConflict),
    #[error("process {0} already has an open negotiation")]
    NegotiationInProgress(ProcessId),
    #[error("history of session {0} was already recorded")]
    HistoryAlreadyRecorded(SessionId),
    #[error("invalid acceptance rule: {0}")]
    InvalidRule(String),
}

impl From<ModelError> for NegotiationError {
    fn from(e: ModelError) -> Self {
        NegotiationError::Engine(e.into())
    }
}

impl NegotiationError {
    pub fn code(&self) -> &'static str {
        match self {
            NegotiationError::Engine(e) => e.code(),
            NegotiationError::Inheritance(e) => e.code(),
            NegotiationError::SessionClosed(_) => "SESSION_CLOSED",
            NegotiationError::SessionOpen(_) => "SESSION_OPEN",
            NegotiationError::NotParticipant(_) => "NOT_PARTICIPANT",
            NegotiationError::UnknownProposal(_) => "UNKNOWN_PROPOSAL",
            NegotiationError::ProposalSuperseded(_) => "PROPOSAL_SUPERSEDED",
            NegotiationError::VotingIncomplete { .. } => "VOTING_INCOMPLETE",
            NegotiationError::AdaptationConflict(_) => "ADAPTATION_CONFLICT",
            NegotiationError::NegotiationInProgress(_) => "NEGOTIATION_IN_PROGRESS",
            NegotiationError::HistoryAlreadyRecorded(_) => "HISTORY_ALREADY_RECORDED",
            NegotiationError::InvalidRule(_) => "INVALID_RULE",
        }
    }
}
