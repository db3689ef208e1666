use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::NegotiationError;
use crate::engine::{EngineError, SocialProcess};
use crate::ids::{CollaboratorId, GroupId, ProcessId, ProposalId, SessionId, VersionId};
use crate::model::ProtocolPatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Open,
    Accepted,
    Rejected,
    Withdrawn,
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionStatus::Open => "open",
            SessionStatus::Accepted => "accepted",
            SessionStatus::Rejected => "rejected",
            SessionStatus::Withdrawn => "withdrawn",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub proposal_id: ProposalId,
    pub proposer: CollaboratorId,
    pub patch: ProtocolPatch,
    #[serde(default)]
    pub rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<ProposalId>,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteValue {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub voter: CollaboratorId,
    pub proposal_id: ProposalId,
    pub value: VoteValue,
    pub cast_at: DateTime<Utc>,
}

/// How many accept votes the live proposal needs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AcceptanceRule {
    #[default]
    Unanimity,
    /// Accept votes over participants must reach `fraction`.
    Quorum { fraction: f64 },
}

impl AcceptanceRule {
    pub fn quorum(fraction: f64) -> Result<Self, NegotiationError> {
        if fraction > 0.0 && fraction <= 1.0 {
            Ok(AcceptanceRule::Quorum { fraction })
        } else {
            Err(NegotiationError::InvalidRule(format!(
                "quorum fraction {fraction} is outside (0, 1]"
            )))
        }
    }

    pub fn is_satisfied(&self, tally: &Tally) -> bool {
        match *self {
            AcceptanceRule::Unanimity => tally.accept == tally.participants,
            AcceptanceRule::Quorum { fraction } => {
                tally.participants > 0 && tally.accept as f64 / tally.participants as f64 >= fraction
            }
        }
    }
}

impl fmt::Display for AcceptanceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AcceptanceRule::Unanimity => f.write_str("unanimity"),
            AcceptanceRule::Quorum { fraction } => write!(f, "quorum:{fraction}"),
        }
    }
}

/// Parses `unanimity` or `quorum:<fraction>`.
impl FromStr for AcceptanceRule {
    type Err = NegotiationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("unanimity") {
            return Ok(AcceptanceRule::Unanimity);
        }
        match s.split_once(':') {
            Some((kind, fraction)) if kind.eq_ignore_ascii_case("quorum") => {
                let fraction: f64 = fraction
                    .trim()
                    .parse()
                    .map_err(|_| NegotiationError::InvalidRule(s.to_owned()))?;
                AcceptanceRule::quorum(fraction)
            }
            _ => Err(NegotiationError::InvalidRule(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub proposal_id: ProposalId,
    pub participants: usize,
    pub accept: usize,
    pub reject: usize,
    pub pending: BTreeSet<CollaboratorId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationSession {
    pub session_id: SessionId,
    pub process_ref: ProcessId,
    /// Group of the process when the session opened; owner of the history.
    pub originating_group: GroupId,
    pub base_version: VersionId,
    pub participants: BTreeSet<CollaboratorId>,
    pub proposals: Vec<Proposal>,
    /// Current votes only; a later vote by the same voter on the same
    /// proposal replaces the earlier one.
    pub votes: Vec<Vote>,
    pub consents: BTreeMap<CollaboratorId, bool>,
    pub status: SessionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_version: Option<VersionId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_reason: Option<String>,
    pub opened_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub recorded: bool,
}

impl NegotiationSession {
    pub fn is_open(&self) -> bool {
        self.status == SessionStatus::Open
    }

    pub fn proposal(&self, id: &ProposalId) -> Option<&Proposal> {
        self.proposals.iter().find(|p| &p.proposal_id == id)
    }

    /// The one proposal nobody has superseded yet.
    pub fn live_proposal(&self) -> &Proposal {
        self.proposals.last().expect("a session always has a proposal")
    }

    pub fn is_superseded(&self, id: &ProposalId) -> bool {
        self.proposals.iter().any(|p| p.supersedes.as_ref() == Some(id))
    }

    pub fn tally(&self, proposal_id: &ProposalId) -> Tally {
        let mut tally = Tally {
            proposal_id: proposal_id.clone(),
            participants: self.participants.len(),
            accept: 0,
            reject: 0,
            pending: self.participants.clone(),
        };
        for vote in self.votes.iter().filter(|v| &v.proposal_id == proposal_id) {
            tally.pending.remove(&vote.voter);
            match vote.value {
                VoteValue::Accept => tally.accept += 1,
                VoteValue::Reject => tally.reject += 1,
            }
        }
        tally
    }

    pub(crate) fn ensure_open(&self) -> Result<(), NegotiationError> {
        if self.is_open() {
            Ok(())
        } else {
            Err(NegotiationError::SessionClosed(self.session_id.clone()))
        }
    }

    pub(crate) fn ensure_participant(&self, who: &CollaboratorId) -> Result<(), NegotiationError> {
        if self.participants.contains(who) {
            Ok(())
        } else {
            Err(NegotiationError::NotParticipant(who.clone()))
        }
    }

    fn next_proposal_id(&self) -> ProposalId {
        ProposalId::new(format!("p{}", self.proposals.len() + 1))
    }

    pub(crate) fn close(&mut self, status: SessionStatus, reason: Option<String>, now: DateTime<Utc>) {
        self.status = status;
        self.closed_reason = reason;
        self.closed_at = Some(now);
    }
}

/// Opens a session on a running process. Participants are the group
/// members at this moment.
pub fn open_negotiation(
    session_id: impl Into<SessionId>,
    process: &SocialProcess,
    initiator: &CollaboratorId,
    patch: ProtocolPatch,
    rationale: impl Into<String>,
    now: DateTime<Utc>,
) -> Result<NegotiationSession, NegotiationError> {
    process.ensure_mutable()?;
    if !process.group.contains(initiator) {
        return Err(EngineError::UnknownCollaborator(initiator.clone()).into());
    }
    let mut session = NegotiationSession {
        session_id: session_id.into(),
        process_ref: process.process_id.clone(),
        originating_group: process.group.group_id.clone(),
        base_version: process.protocol_version.clone(),
        participants: process.group.members.keys().cloned().collect(),
        proposals: Vec::new(),
        votes: Vec::new(),
        consents: BTreeMap::new(),
        status: SessionStatus::Open,
        result_version: None,
        closed_reason: None,
        opened_at: now,
        closed_at: None,
        recorded: false,
    };
    session.proposals.push(Proposal {
        proposal_id: session.next_proposal_id(),
        proposer: initiator.clone(),
        patch,
        rationale: rationale.into(),
        supersedes: None,
        submitted_at: now,
    });
    Ok(session)
}

/// Adds a counter-proposal. It must supersede the live proposal; votes
/// cast on the superseded one do not carry over.
pub fn propose_amendment(
    session: &mut NegotiationSession,
    participant: &CollaboratorId,
    patch: ProtocolPatch,
    rationale: impl Into<String>,
    supersedes: &ProposalId,
    now: DateTime<Utc>,
) -> Result<Proposal, NegotiationError> {
    session.ensure_open()?;
    session.ensure_participant(participant)?;
    if session.proposal(supersedes).is_none() {
        return Err(NegotiationError::UnknownProposal(supersedes.clone()));
    }
    if session.is_superseded(supersedes) {
        return Err(NegotiationError::ProposalSuperseded(supersedes.clone()));
    }
    let proposal = Proposal {
        proposal_id: session.next_proposal_id(),
        proposer: participant.clone(),
        patch,
        rationale: rationale.into(),
        supersedes: Some(supersedes.clone()),
        submitted_at: now,
    };
    session.proposals.push(proposal.clone());
    Ok(proposal)
}

pub fn cast_vote(
    session: &mut NegotiationSession,
    participant: &CollaboratorId,
    proposal_id: &ProposalId,
    value: VoteValue,
    now: DateTime<Utc>,
) -> Result<Tally, NegotiationError> {
    session.ensure_open()?;
    session.ensure_participant(participant)?;
    if session.proposal(proposal_id).is_none() {
        return Err(NegotiationError::UnknownProposal(proposal_id.clone()));
    }
    if session.is_superseded(proposal_id) {
        return Err(NegotiationError::ProposalSuperseded(proposal_id.clone()));
    }
    let vote = Vote {
        voter: participant.clone(),
        proposal_id: proposal_id.clone(),
        value,
        cast_at: now,
    };
    match session
        .votes
        .iter_mut()
        .find(|v| &v.voter == participant && &v.proposal_id == proposal_id)
    {
        Some(existing) => *existing = vote,
        None => session.votes.push(vote),
    }
    Ok(session.tally(proposal_id))
}

/// Records a participant's own publication consent. Allowed until the
/// history record is written.
pub fn set_consent(
    session: &mut NegotiationSession,
    participant: &CollaboratorId,
    consent: bool,
) -> Result<(), NegotiationError> {
    session.ensure_participant(participant)?;
    if session.recorded {
        return Err(NegotiationError::HistoryAlreadyRecorded(session.session_id.clone()));
    }
    session.consents.insert(participant.clone(), consent);
    Ok(())
}

/// What closing would decide, without touching anything.
#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Accept(Proposal),
    Reject(Tally),
}

/// Checks the closer and the votes, then applies `rule` to the live
/// proposal. Every participant must have voted on it.
pub fn decide(
    session: &NegotiationSession,
    closer: &CollaboratorId,
    rule: &AcceptanceRule,
) -> Result<Decision, NegotiationError> {
    session.ensure_open()?;
    session.ensure_participant(closer)?;
    let live = session.live_proposal();
    let tally = session.tally(&live.proposal_id);
    if !tally.pending.is_empty() {
        return Err(NegotiationError::VotingIncomplete {
            proposal: live.proposal_id.clone(),
            pending: tally.pending.into_iter().collect(),
        });
    }
    if rule.is_satisfied(&tally) {
        Ok(Decision::Accept(live.clone()))
    } else {
        Ok(Decision::Reject(tally))
    }
}

/// Voids an open session, for instance after its group changed.
pub fn withdraw(session: &mut NegotiationSession, reason: impl Into<String>, now: DateTime<Utc>) -> bool {
    if session.is_open() {
        session.close(SessionStatus::Withdrawn, Some(reason.into()), now);
        true
    } else {
        false
    }
}
