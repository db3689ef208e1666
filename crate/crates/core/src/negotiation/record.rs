use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::session::{NegotiationSession, Proposal, SessionStatus, Vote};
use super::NegotiationError;
use crate::ids::{CollaboratorId, GroupId, ProcessId, SessionId, VersionId};

/// Immutable snapshot of a closed session plus publication consents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationRecord {
    pub session: NegotiationSession,
    pub consents: BTreeMap<CollaboratorId, bool>,
    pub outcome: SessionStatus,
    pub opened_at: DateTime<Utc>,
    pub closed_at: DateTime<Utc>,
    pub recorded_at: DateTime<Utc>,
}

impl NegotiationRecord {
    pub fn originating_group(&self) -> &GroupId {
        &self.session.originating_group
    }

    pub fn consented(&self, who: &CollaboratorId) -> bool {
        self.consents.get(who).copied().unwrap_or(false)
    }

    /// The record as `requester` may see it. The originating group sees
    /// everything; other groups only see what consenting participants
    /// contributed.
    pub fn view_for(&self, requester: &GroupId) -> RecordView {
        let owner = requester == self.originating_group();
        let visible = |who: &CollaboratorId| owner || self.consented(who);
        let s = &self.session;
        let participants: Vec<CollaboratorId> = s.participants.iter().filter(|p| visible(p)).cloned().collect();
        RecordView {
            session_id: s.session_id.clone(),
            process_ref: s.process_ref.clone(),
            originating_group: s.originating_group.clone(),
            base_version: s.base_version.clone(),
            result_version: s.result_version.clone(),
            outcome: self.outcome,
            opened_at: self.opened_at,
            closed_at: self.closed_at,
            redacted: !owner && participants.len() < s.participants.len(),
            withheld_participants: s.participants.len() - participants.len(),
            participants,
            proposals: s.proposals.iter().filter(|p| visible(&p.proposer)).cloned().collect(),
            votes: s.votes.iter().filter(|v| visible(&v.voter)).cloned().collect(),
        }
    }
}

/// A possibly redacted view of a [`NegotiationRecord`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordView {
    pub session_id: SessionId,
    pub process_ref: ProcessId,
    pub originating_group: GroupId,
    pub base_version: VersionId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_version: Option<VersionId>,
    pub outcome: SessionStatus,
    pub opened_at: DateTime<Utc>,
    pub closed_at: DateTime<Utc>,
    pub redacted: bool,
    pub withheld_participants: usize,
    pub participants: Vec<CollaboratorId>,
    pub proposals: Vec<Proposal>,
    pub votes: Vec<Vote>,
}

/// Freezes a closed session into a record. Participants missing from
/// `consents` have not consented.
pub fn record_history(
    session: &NegotiationSession,
    consents: &BTreeMap<CollaboratorId, bool>,
    now: DateTime<Utc>,
) -> Result<NegotiationRecord, NegotiationError> {
    if session.is_open() {
        return Err(NegotiationError::SessionOpen(session.session_id.clone()));
    }
    if session.recorded {
        return Err(NegotiationError::HistoryAlreadyRecorded(session.session_id.clone()));
    }
    if let Some(stranger) = consents.keys().find(|c| !session.participants.contains(*c)) {
        return Err(NegotiationError::NotParticipant(stranger.clone()));
    }
    let consents: BTreeMap<CollaboratorId, bool> = session
        .participants
        .iter()
        .map(|p| (p.clone(), consents.get(p).copied().unwrap_or(false)))
        .collect();
    let mut snapshot = session.clone();
    snapshot.recorded = true;
    snapshot.consents = consents.clone();
    Ok(NegotiationRecord {
        outcome: session.status,
        opened_at: session.opened_at,
        closed_at: session.closed_at.unwrap_or(now),
        recorded_at: now,
        session: snapshot,
        consents,
    })
}

/// Participants whose contributions a cross-group view must drop.
pub fn withheld(record: &NegotiationRecord) -> BTreeSet<CollaboratorId> {
    record
        .session
        .participants
        .iter()
        .filter(|p| !record.consented(p))
        .cloned()
        .collect()
}
