use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::session::{decide, AcceptanceRule, Decision, NegotiationSession, SessionStatus, Tally};
use super::NegotiationError;
use crate::engine::{migrate, EngineError, MigrationMarker, MigrationResult, SocialProcess};
use crate::ids::{CollaboratorId, SessionId, VersionId};
use crate::inheritance::{InheritanceError, ProtocolRepository};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloseOutcome {
    pub session_id: SessionId,
    pub status: SessionStatus,
    pub tally: Tally,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_version: Option<VersionId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub migration: Option<MigrationMarker>,
}

/// Decides the session and, on acceptance, commits the adaptation:
/// patch the base protocol, validate it, migrate the process, and store
/// the new version with a lineage edge from the base.
///
/// Either every step lands or nothing changes: all work happens on copies
/// that replace the originals only after the last step succeeded.
pub fn close_negotiation(
    session: &mut NegotiationSession,
    process: &mut SocialProcess,
    repo: &mut ProtocolRepository,
    rule: &AcceptanceRule,
    closer: &CollaboratorId,
    now: DateTime<Utc>,
) -> Result<CloseOutcome, NegotiationError> {
    if process.process_id != session.process_ref {
        return Err(EngineError::HistoryMismatch(format!(
            "session {} belongs to {}, not {}",
            session.session_id, session.process_ref, process.process_id
        ))
        .into());
    }
    let proposal = match decide(session, closer, rule)? {
        Decision::Reject(tally) => {
            session.close(SessionStatus::Rejected, Some(format!("{rule} not met")), now);
            return Ok(CloseOutcome {
                session_id: session.session_id.clone(),
                status: SessionStatus::Rejected,
                tally,
                result_version: None,
                migration: None,
            });
        }
        Decision::Accept(proposal) => proposal,
    };
    if process.protocol_version != session.base_version {
        return Err(EngineError::WrongProtocolVersion {
            expected: session.base_version.clone(),
            got: process.protocol_version.clone(),
        }
        .into());
    }

    let mut next_repo = repo.clone();
    let version = next_repo.derive_version(
        &session.base_version,
        &proposal.patch,
        Some(session.session_id.to_string()),
        &session.originating_group,
    )?;
    let target = next_repo.get(&version)?.clone();
    let mut next_process = process.clone();
    let marker = match migrate(&mut next_process, &target, now) {
        Ok(MigrationResult::Migrated(marker)) => marker,
        Ok(MigrationResult::Conflict(conflict)) => return Err(NegotiationError::AdaptationConflict(conflict)),
        Err(EngineError::NotImplementedProtocol(level)) => {
            return Err(InheritanceError::AdaptationInvalid(format!(
                "adapted protocol is {level}; a running process needs an implemented one"
            ))
            .into())
        }
        Err(e) => return Err(e.into()),
    };

    let tally = session.tally(&proposal.proposal_id);
    *repo = next_repo;
    *process = next_process;
    session.close(SessionStatus::Accepted, None, now);
    session.result_version = Some(version.clone());
    Ok(CloseOutcome {
        session_id: session.session_id.clone(),
        status: SessionStatus::Accepted,
        tally,
        result_version: Some(version),
        migration: Some(marker),
    })
}
