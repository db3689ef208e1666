use chrono::{DateTime, Utc};

use super::events::Event;
use super::ServerError;
use crate::engine::{
    apply_transition_event, instantiate, merge_groups, migrate, split_group, EngineError, Group, MigrationMarker,
    MigrationResult, ProcessStatus, SocialProcess, TransitionEvent,
};
use crate::ids::{GroupId, ProcessId, SessionId, VersionId};
use crate::inheritance::{propagate, InheritanceError, PropagationReport, PvcState, Scope};
use crate::model::ModelError;
use crate::negotiation::{
    cast_vote, close_negotiation, open_negotiation, propose_amendment, record_history, set_consent, CloseOutcome,
    NegotiationError, NegotiationSession, Proposal, Tally,
};

/// What applying an event produced, for the caller and for checking the
/// output fields of replayed events.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Unit,
    Version(VersionId),
    Process(ProcessId),
    Children(Vec<ProcessId>),
    Transition(TransitionEvent),
    Session(SessionId),
    Proposal(Proposal),
    Tally(Tally),
    Closed(CloseOutcome),
    Propagated(PropagationReport),
    Migrated(MigrationMarker),
}

fn require_group<'s>(state: &'s PvcState, id: &GroupId) -> Result<&'s Group, ServerError> {
    state
        .groups
        .get(id)
        .ok_or_else(|| InheritanceError::UnknownGroup(id.clone()).into())
}

fn process_mut<'s>(state: &'s mut PvcState, id: &ProcessId) -> Result<&'s mut SocialProcess, ServerError> {
    state
        .processes
        .get_mut(id)
        .ok_or_else(|| ServerError::UnknownProcess(id.to_string()))
}

fn session_mut<'s>(state: &'s mut PvcState, id: &SessionId) -> Result<&'s mut NegotiationSession, ServerError> {
    state
        .negotiations
        .get_mut(id)
        .ok_or_else(|| ServerError::UnknownSession(id.to_string()))
}

/// Applies one event. This is the only code path that mutates community
/// state, for live commands and replay alike, so both end up identical.
pub fn apply_event(state: &mut PvcState, event: &Event, now: DateTime<Utc>) -> Result<Effect, ServerError> {
    match event {
        Event::EnvironmentRegistered { environment } => {
            if state.environments.contains_key(&environment.env_id) {
                return Err(ServerError::EnvironmentExists(environment.env_id.to_string()));
            }
            if let Some(empty) = environment.empty_services().first() {
                return Err(ServerError::EmptyService(empty.to_string()));
            }
            if let Some(bad) = environment.services.values().flatten().find(|e| !e.is_valid()) {
                return Err(ModelError::InvalidUri(bad.to_string()).into());
            }
            state.environments.insert(environment.env_id.clone(), environment.clone());
            Ok(Effect::Unit)
        }
        Event::GroupRegistered { group } => {
            if state.groups.contains_key(&group.group_id) {
                return Err(ServerError::GroupExists(group.group_id.to_string()));
            }
            if !state.environments.contains_key(&group.environment_ref) {
                return Err(InheritanceError::UnknownEnvironment(group.environment_ref.clone()).into());
            }
            if group.members.is_empty() {
                return Err(EngineError::EmptyGroup(group.group_id.clone()).into());
            }
            state.groups.insert(group.group_id.clone(), group.clone());
            Ok(Effect::Unit)
        }
        Event::ProtocolRegistered { protocol, scope, .. } => {
            if let Scope::Private(owner) = scope {
                require_group(state, owner)?;
            }
            let version = state.repository.register_protocol(protocol, scope.clone())?;
            Ok(Effect::Version(version))
        }
        Event::VersionDerived {
            parent,
            patch,
            owner,
            negotiation_ref,
            ..
        } => {
            require_group(state, owner)?;
            let version = state
                .repository
                .derive_version(parent, patch, negotiation_ref.clone(), owner)?;
            Ok(Effect::Version(version))
        }
        Event::ProcessInstantiated {
            process_id,
            version,
            group_id,
            start_state,
        } => {
            if state.processes.contains_key(process_id) {
                return Err(ServerError::ProcessExists(process_id.to_string()));
            }
            let group = require_group(state, group_id)?.clone();
            let protocol = state.repository.get(version)?;
            let process = instantiate(process_id.clone(), protocol, group, start_state.as_ref())?;
            state.processes.insert(process_id.clone(), process);
            Ok(Effect::Process(process_id.clone()))
        }
        Event::TransitionTriggered { process_id, event: step } | Event::ActionFailed { process_id, event: step } => {
            let expect_ok = matches!(event, Event::TransitionTriggered { .. });
            if step.action_result.is_ok() != expect_ok {
                return Err(EngineError::HistoryMismatch(format!(
                    "{} carries a {} action result",
                    event.kind(),
                    if step.action_result.is_ok() { "successful" } else { "failed" }
                ))
                .into());
            }
            let version = process_mut(state, process_id)?.protocol_version.clone();
            let protocol = state.repository.get(&version)?.clone();
            let process = process_mut(state, process_id)?;
            apply_transition_event(process, &protocol, step)?;
            if process.status == ProcessStatus::Completed {
                state.withdraw_sessions_of(process_id, "process completed", now);
            }
            Ok(Effect::Transition(step.clone()))
        }
        Event::GroupSplit {
            process_id, partition, ..
        } => {
            let parent = process_mut(state, process_id)?;
            let children = split_group(parent, partition, now)?;
            for child in &children {
                if state.processes.contains_key(&child.process_id) {
                    return Err(ServerError::ProcessExists(child.process_id.to_string()));
                }
                if state.groups.contains_key(&child.group.group_id) {
                    return Err(ServerError::GroupExists(child.group.group_id.to_string()));
                }
            }
            state.withdraw_sessions_of(process_id, "group split", now);
            let ids = children.iter().map(|c| c.process_id.clone()).collect();
            for child in children {
                state.groups.insert(child.group.group_id.clone(), child.group.clone());
                state.processes.insert(child.process_id.clone(), child);
            }
            Ok(Effect::Children(ids))
        }
        Event::GroupsMerged { process_ids, .. } => {
            let mut taken = Vec::new();
            for id in process_ids {
                match state.processes.remove(id) {
                    Some(p) => taken.push(p),
                    None if taken.iter().any(|p: &SocialProcess| &p.process_id == id) => {
                        return Err(EngineError::InvalidMerge(format!("{id} listed twice")).into())
                    }
                    None => return Err(ServerError::UnknownProcess(id.to_string())),
                }
            }
            let mut refs: Vec<&mut SocialProcess> = taken.iter_mut().collect();
            let merged = merge_groups(&mut refs, now)?;
            if state.processes.contains_key(&merged.process_id) {
                return Err(ServerError::ProcessExists(merged.process_id.to_string()));
            }
            if state.groups.contains_key(&merged.group.group_id) {
                return Err(ServerError::GroupExists(merged.group.group_id.to_string()));
            }
            for p in taken {
                state.processes.insert(p.process_id.clone(), p);
            }
            for id in process_ids {
                state.withdraw_sessions_of(id, "groups merged", now);
            }
            let id = merged.process_id.clone();
            state.groups.insert(merged.group.group_id.clone(), merged.group.clone());
            state.processes.insert(id.clone(), merged);
            Ok(Effect::Process(id))
        }
        Event::NegotiationOpened {
            session_id,
            process_id,
            initiator,
            patch,
            rationale,
        } => {
            if state.negotiations.contains_key(session_id) {
                return Err(ServerError::SessionExists(session_id.to_string()));
            }
            if state.open_session_for(process_id).is_some() {
                return Err(NegotiationError::NegotiationInProgress(process_id.clone()).into());
            }
            let process = process_mut(state, process_id)?;
            let session = open_negotiation(session_id.clone(), process, initiator, patch.clone(), rationale.clone(), now)?;
            state.negotiations.insert(session_id.clone(), session);
            Ok(Effect::Session(session_id.clone()))
        }
        Event::ProposalMade {
            session_id,
            proposer,
            patch,
            rationale,
            supersedes,
            ..
        } => {
            let session = session_mut(state, session_id)?;
            let proposal = propose_amendment(session, proposer, patch.clone(), rationale.clone(), supersedes, now)?;
            Ok(Effect::Proposal(proposal))
        }
        Event::VoteCast {
            session_id,
            voter,
            proposal_id,
            value,
        } => {
            let session = session_mut(state, session_id)?;
            Ok(Effect::Tally(cast_vote(session, voter, proposal_id, *value, now)?))
        }
        Event::ConsentSet {
            session_id,
            participant,
            consent,
        } => {
            set_consent(session_mut(state, session_id)?, participant, *consent)?;
            Ok(Effect::Unit)
        }
        Event::NegotiationClosed {
            session_id, closer, rule, ..
        } => {
            let PvcState {
                negotiations,
                processes,
                repository,
                ..
            } = state;
            let session = negotiations
                .get_mut(session_id)
                .ok_or_else(|| ServerError::UnknownSession(session_id.to_string()))?;
            let process = processes
                .get_mut(&session.process_ref)
                .ok_or_else(|| ServerError::UnknownProcess(session.process_ref.to_string()))?;
            let outcome = close_negotiation(session, process, repository, rule, closer, now)?;
            Ok(Effect::Closed(outcome))
        }
        Event::HistoryRecorded { session_id } => {
            let session = session_mut(state, session_id)?;
            let record = record_history(session, &session.consents.clone(), now)?;
            session.recorded = true;
            state.repository.add_record(record);
            Ok(Effect::Unit)
        }
        Event::Propagated { version, strategy, .. } => {
            let report = propagate(state, version, *strategy, now)?;
            if !report.applied {
                return Err(ServerError::PropagationConflict(Box::new(report)));
            }
            Ok(Effect::Propagated(report))
        }
        Event::ProcessMigrated { process_id, version } => {
            let target = state.repository.get(version)?.clone();
            let process = process_mut(state, process_id)?;
            match migrate(process, &target, now)? {
                MigrationResult::Migrated(marker) => {
                    state.withdraw_sessions_of(process_id, "process migrated", now);
                    Ok(Effect::Migrated(marker))
                }
                MigrationResult::Conflict(conflict) => Err(ServerError::MigrationConflict(conflict)),
            }
        }
    }
}

impl Event {
    /// Copies outputs of a live application into the event before it is
    /// written.
    pub(crate) fn fill(&mut self, effect: &Effect) {
        match (self, effect) {
            (Event::ProtocolRegistered { version, .. }, Effect::Version(v))
            | (Event::VersionDerived { version, .. }, Effect::Version(v)) => *version = v.clone(),
            (Event::GroupSplit { children, .. }, Effect::Children(ids)) => *children = ids.clone(),
            (Event::GroupsMerged { merged, .. }, Effect::Process(id)) => *merged = id.clone(),
            (Event::ProposalMade { proposal_id, .. }, Effect::Proposal(p)) => *proposal_id = p.proposal_id.clone(),
            (
                Event::NegotiationClosed {
                    status, result_version, ..
                },
                Effect::Closed(outcome),
            ) => {
                *status = outcome.status;
                *result_version = outcome.result_version.clone();
            }
            (Event::Propagated { migrated, .. }, Effect::Propagated(report)) => *migrated = report.migrated.clone(),
            _ => {}
        }
    }

    /// True when the recorded outputs agree with a replayed application.
    pub(crate) fn agrees_with(&self, effect: &Effect) -> bool {
        let mut expected = self.clone();
        expected.fill(effect);
        &expected == self
    }
}
