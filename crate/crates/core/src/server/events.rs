use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::ServerError;
use crate::engine::{Group, TransitionEvent};
use crate::ids::{CollaboratorId, GroupId, ProcessId, ProposalId, SessionId, StateId, VersionId};
use crate::inheritance::{PropagationStrategy, Scope};
use crate::model::{Environment, ProtocolPatch, SocialProtocol};
use crate::negotiation::{AcceptanceRule, SessionStatus, VoteValue};

/// Everything that changes community state. Output fields (`version`,
/// `children`, ...) are filled in after the event was applied live and
/// checked again on replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum Event {
    EnvironmentRegistered {
        environment: Environment,
    },
    GroupRegistered {
        group: Group,
    },
    ProtocolRegistered {
        protocol: SocialProtocol,
        scope: Scope,
        #[serde(default)]
        version: VersionId,
    },
    VersionDerived {
        parent: VersionId,
        patch: ProtocolPatch,
        owner: GroupId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        negotiation_ref: Option<String>,
        #[serde(default)]
        version: VersionId,
    },
    ProcessInstantiated {
        process_id: ProcessId,
        version: VersionId,
        group_id: GroupId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start_state: Option<StateId>,
    },
    TransitionTriggered {
        process_id: ProcessId,
        event: TransitionEvent,
    },
    ActionFailed {
        process_id: ProcessId,
        event: TransitionEvent,
    },
    GroupSplit {
        process_id: ProcessId,
        partition: Vec<BTreeSet<CollaboratorId>>,
        #[serde(default)]
        children: Vec<ProcessId>,
    },
    GroupsMerged {
        process_ids: Vec<ProcessId>,
        #[serde(default)]
        merged: ProcessId,
    },
    NegotiationOpened {
        session_id: SessionId,
        process_id: ProcessId,
        initiator: CollaboratorId,
        patch: ProtocolPatch,
        #[serde(default)]
        rationale: String,
    },
    ProposalMade {
        session_id: SessionId,
        proposer: CollaboratorId,
        patch: ProtocolPatch,
        #[serde(default)]
        rationale: String,
        supersedes: ProposalId,
        #[serde(default)]
        proposal_id: ProposalId,
    },
    VoteCast {
        session_id: SessionId,
        voter: CollaboratorId,
        proposal_id: ProposalId,
        value: VoteValue,
    },
    ConsentSet {
        session_id: SessionId,
        participant: CollaboratorId,
        consent: bool,
    },
    NegotiationClosed {
        session_id: SessionId,
        closer: CollaboratorId,
        rule: AcceptanceRule,
        #[serde(default = "open_status")]
        status: SessionStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        result_version: Option<VersionId>,
    },
    HistoryRecorded {
        session_id: SessionId,
    },
    Propagated {
        version: VersionId,
        strategy: PropagationStrategy,
        #[serde(default)]
        migrated: Vec<ProcessId>,
    },
    ProcessMigrated {
        process_id: ProcessId,
        version: VersionId,
    },
}

fn open_status() -> SessionStatus {
    SessionStatus::Open
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::EnvironmentRegistered { .. } => "EnvironmentRegistered",
            Event::GroupRegistered { .. } => "GroupRegistered",
            Event::ProtocolRegistered { .. } => "ProtocolRegistered",
            Event::VersionDerived { .. } => "VersionDerived",
            Event::ProcessInstantiated { .. } => "ProcessInstantiated",
            Event::TransitionTriggered { .. } => "TransitionTriggered",
            Event::ActionFailed { .. } => "ActionFailed",
            Event::GroupSplit { .. } => "GroupSplit",
            Event::GroupsMerged { .. } => "GroupsMerged",
            Event::NegotiationOpened { .. } => "NegotiationOpened",
            Event::ProposalMade { .. } => "ProposalMade",
            Event::VoteCast { .. } => "VoteCast",
            Event::ConsentSet { .. } => "ConsentSet",
            Event::NegotiationClosed { .. } => "NegotiationClosed",
            Event::HistoryRecorded { .. } => "HistoryRecorded",
            Event::Propagated { .. } => "Propagated",
            Event::ProcessMigrated { .. } => "ProcessMigrated",
        }
    }

    /// Checks `payload` against the schema of `kind`.
    pub fn from_parts(kind: &str, payload: &Value) -> Result<Event, ServerError> {
        let tagged = serde_json::json!({ "kind": kind, "payload": payload });
        serde_json::from_value(tagged).map_err(|e| ServerError::SchemaInvalid(format!("{kind}: {e}")))
    }

    pub fn payload(&self) -> Value {
        match serde_json::to_value(self).expect("events serialize") {
            Value::Object(mut map) => map.remove("payload").unwrap_or(Value::Null),
            _ => unreachable!("events serialize as tagged objects"),
        }
    }
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub global_seq: u64,
    pub kind: String,
    pub payload: Value,
    pub timestamp: DateTime<Utc>,
    pub checksum: String,
}

impl EventRecord {
    pub fn new(global_seq: u64, event: &Event, timestamp: DateTime<Utc>) -> Self {
        let mut record = EventRecord {
            global_seq,
            kind: event.kind().to_owned(),
            payload: event.payload(),
            timestamp,
            checksum: String::new(),
        };
        record.checksum = record.compute_checksum();
        record
    }

    /// SHA-256 over the compact, key-sorted JSON of every field but the
    /// checksum itself.
    pub fn compute_checksum(&self) -> String {
        let canonical = serde_json::json!({
            "global_seq": self.global_seq,
            "kind": self.kind,
            "payload": self.payload,
            "timestamp": self.timestamp,
        });
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }

    pub fn event(&self) -> Result<Event, ServerError> {
        Event::from_parts(&self.kind, &self.payload)
    }

    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("records serialize");
        line.push('\n');
        line
    }
}
