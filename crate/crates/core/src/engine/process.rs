//! Running instances of implemented protocols.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::executor::{ActionContext, ActionExecutor};
use super::group::Group;
use super::EngineError;
use crate::ids::{CollaboratorId, ProcessId, RoleName, StateId, TransitionId, VersionId};
use crate::model::{
    can_terminate_from, level_unchecked, validate_structure, ModelError, Outcome,
    RefinementLevel, SocialProtocol, Transition,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessStatus {
    Running,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessOrigin {
    Instantiated,
    SplitFrom { parent: ProcessId },
    MergedFrom { sources: Vec<ProcessId> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetireReason {
    Split,
    Merge,
}

/// Set once a group action replaced this process; the value is then frozen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Retirement {
    pub reason: RetireReason,
    pub successors: Vec<ProcessId>,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ActionResult {
    Ok { payload: Value },
    Failed { reason: String },
}

impl ActionResult {
    pub fn is_ok(&self) -> bool {
        matches!(self, ActionResult::Ok { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionEvent {
    pub seq: u64,
    pub transition_id: TransitionId,
    pub actor: CollaboratorId,
    pub from: StateId,
    /// Equal to `from` when the action failed.
    pub to: StateId,
    pub action_result: ActionResult,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationMarker {
    pub seq: u64,
    pub from_version: VersionId,
    pub to_version: VersionId,
    pub state: StateId,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HistoryEntry {
    Transition(TransitionEvent),
    Migrated(MigrationMarker),
}

impl HistoryEntry {
    pub fn seq(&self) -> u64 {
        match self {
            HistoryEntry::Transition(e) => e.seq,
            HistoryEntry::Migrated(m) => m.seq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocialProcess {
    pub process_id: ProcessId,
    pub protocol_version: VersionId,
    pub group: Group,
    pub start_state: StateId,
    pub current_state: StateId,
    pub status: ProcessStatus,
    pub origin: ProcessOrigin,
    pub history: Vec<HistoryEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retired: Option<Retirement>,
}

impl SocialProcess {
    pub fn is_running(&self) -> bool {
        self.status == ProcessStatus::Running && self.retired.is_none()
    }

    pub(crate) fn next_seq(&self) -> u64 {
        self.history.last().map_or(1, |e| e.seq() + 1)
    }

    /// Rejects completed and retired processes.
    pub(crate) fn ensure_mutable(&self) -> Result<(), EngineError> {
        if self.retired.is_some() {
            return Err(EngineError::ProcessRetired(self.process_id.clone()));
        }
        if self.status == ProcessStatus::Completed {
            return Err(EngineError::ProcessCompleted(self.process_id.clone()));
        }
        Ok(())
    }

    fn ensure_ruled_by(&self, protocol: &SocialProtocol) -> Result<(), EngineError> {
        if self.protocol_version != protocol.version {
            return Err(EngineError::WrongProtocolVersion {
                expected: self.protocol_version.clone(),
                got: protocol.version.clone(),
            });
        }
        Ok(())
    }
}

fn status_at(protocol: &SocialProtocol, state: &StateId) -> ProcessStatus {
    if protocol.is_end_state(state.as_str()) {
        ProcessStatus::Completed
    } else {
        ProcessStatus::Running
    }
}

/// Checks validity and the Implemented level.
pub(crate) fn require_implemented(protocol: &SocialProtocol) -> Result<(), EngineError> {
    let report = validate_structure(protocol);
    if !report.valid {
        return Err(ModelError::InvalidProtocol(report.error_summary()).into());
    }
    match level_unchecked(protocol) {
        RefinementLevel::Implemented => Ok(()),
        level => Err(EngineError::NotImplementedProtocol(level)),
    }
}

fn check_group_roles(protocol: &SocialProtocol, group: &Group) -> Result<(), EngineError> {
    if group.members.is_empty() {
        return Err(EngineError::EmptyGroup(group.group_id.clone()));
    }
    for (collaborator, roles) in &group.members {
        if let Some(role) = roles.iter().find(|r| !protocol.roles.contains(*r)) {
            return Err(EngineError::UnknownRoleAssignment {
                collaborator: collaborator.clone(),
                role: role.clone(),
            });
        }
    }
    Ok(())
}

pub fn instantiate(
    process_id: impl Into<ProcessId>,
    protocol: &SocialProtocol,
    group: Group,
    start_choice: Option<&StateId>,
) -> Result<SocialProcess, EngineError> {
    require_implemented(protocol)?;
    check_group_roles(protocol, &group)?;
    let starts: Vec<&StateId> = protocol.start_states().collect();
    let start = match start_choice {
        Some(choice) if starts.contains(&choice) => choice.clone(),
        Some(choice) => return Err(EngineError::InvalidStartChoice(choice.clone())),
        None if starts.len() == 1 => starts[0].clone(),
        None => return Err(EngineError::AmbiguousStart(starts.len())),
    };
    Ok(SocialProcess {
        process_id: process_id.into(),
        protocol_version: protocol.version.clone(),
        group,
        start_state: start.clone(),
        current_state: start,
        status: ProcessStatus::Running,
        origin: ProcessOrigin::Instantiated,
        history: Vec::new(),
        retired: None,
    })
}

/// Transitions leaving the current state that `collaborator` may trigger.
pub fn available_transitions<'p>(
    process: &SocialProcess,
    protocol: &'p SocialProtocol,
    collaborator: &CollaboratorId,
) -> Result<Vec<&'p Transition>, EngineError> {
    process.ensure_ruled_by(protocol)?;
    let roles = process
        .group
        .roles_of(collaborator)
        .ok_or_else(|| EngineError::UnknownCollaborator(collaborator.clone()))?;
    if !process.is_running() {
        return Ok(Vec::new());
    }
    Ok(protocol
        .transitions
        .iter()
        .filter(|t| t.from == process.current_state && roles.contains(&t.role))
        .collect())
}

/// Every gate `trigger` enforces before the action runs.
pub fn check_trigger<'p>(
    process: &SocialProcess,
    protocol: &'p SocialProtocol,
    collaborator: &CollaboratorId,
    transition_id: &TransitionId,
) -> Result<&'p Transition, EngineError> {
    process.ensure_ruled_by(protocol)?;
    process.ensure_mutable()?;
    let roles = process
        .group
        .roles_of(collaborator)
        .ok_or_else(|| EngineError::UnknownCollaborator(collaborator.clone()))?;
    let transition = protocol
        .transition(transition_id.as_str())
        .ok_or_else(|| EngineError::UnknownTransition(transition_id.clone()))?;
    if transition.from != process.current_state {
        return Err(EngineError::WrongSourceState {
            transition: transition_id.clone(),
            current: process.current_state.clone(),
        });
    }
    if !roles.contains(&transition.role) {
        return Err(EngineError::RoleMismatch {
            collaborator: collaborator.clone(),
            required: transition.role.clone(),
        });
    }
    Ok(transition)
}

/// Runs the transition's action and, on success, moves the process.
///
/// A failed action leaves the state unchanged; the failure is still
/// recorded in the history and reported as `ACTION_FAILED`.
pub fn trigger(
    process: &mut SocialProcess,
    protocol: &SocialProtocol,
    collaborator: &CollaboratorId,
    transition_id: &TransitionId,
    executor: &dyn ActionExecutor,
    now: DateTime<Utc>,
) -> Result<TransitionEvent, EngineError> {
    let event = run_action(process, protocol, collaborator, transition_id, executor, now)?;
    apply_transition_event(process, protocol, &event)?;
    match &event.action_result {
        ActionResult::Ok { .. } => Ok(event),
        ActionResult::Failed { reason } => Err(EngineError::ActionFailed {
            transition: transition_id.clone(),
            reason: reason.clone(),
        }),
    }
}

/// Gates and invokes the action without touching the process.
pub fn run_action(
    process: &SocialProcess,
    protocol: &SocialProtocol,
    collaborator: &CollaboratorId,
    transition_id: &TransitionId,
    executor: &dyn ActionExecutor,
    now: DateTime<Utc>,
) -> Result<TransitionEvent, EngineError> {
    let transition = check_trigger(process, protocol, collaborator, transition_id)?;
    let context = ActionContext {
        process_id: process.process_id.clone(),
        transition_id: transition_id.clone(),
        actor: collaborator.clone(),
        current_state: process.current_state.clone(),
    };
    let result = match &transition.action.binding {
        Some(endpoint) => match executor.invoke(endpoint, &context) {
            Ok(payload) => ActionResult::Ok { payload },
            Err(failure) => ActionResult::Failed {
                reason: failure.reason,
            },
        },
        None => ActionResult::Failed {
            reason: format!("action {} has no endpoint", transition.action.name),
        },
    };
    let to = if result.is_ok() {
        transition.to.clone()
    } else {
        process.current_state.clone()
    };
    Ok(TransitionEvent {
        seq: process.next_seq(),
        transition_id: transition_id.clone(),
        actor: collaborator.clone(),
        from: process.current_state.clone(),
        to,
        action_result: result,
        timestamp: now,
    })
}

/// Appends a recorded event after re-checking it against the protocol and
/// the group. Used both live and when replaying a log.
pub fn apply_transition_event(
    process: &mut SocialProcess,
    protocol: &SocialProtocol,
    event: &TransitionEvent,
) -> Result<(), EngineError> {
    check_trigger(process, protocol, &event.actor, &event.transition_id)?;
    let transition = protocol
        .transition(event.transition_id.as_str())
        .expect("checked above");
    let expected_to = if event.action_result.is_ok() {
        &transition.to
    } else {
        &process.current_state
    };
    if event.seq != process.next_seq() || event.from != process.current_state || &event.to != expected_to {
        return Err(EngineError::HistoryMismatch(format!(
            "event #{} ({} -> {}) does not follow {} at seq {}",
            event.seq,
            event.from,
            event.to,
            process.current_state,
            process.next_seq()
        )));
    }
    process.current_state = event.to.clone();
    process.status = status_at(protocol, &process.current_state);
    process.history.push(HistoryEntry::Transition(event.clone()));
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum ProcessOutcome {
    Running,
    Success { state: StateId },
    Failure { state: StateId },
}

/// End states without an explicit outcome count as failures.
pub fn outcome(process: &SocialProcess, protocol: &SocialProtocol) -> ProcessOutcome {
    match protocol.state(process.current_state.as_str()) {
        Some(node) if protocol.is_end_state(node.id.as_str()) => match node.outcome {
            Some(Outcome::Success) => ProcessOutcome::Success {
                state: node.id.clone(),
            },
            _ => ProcessOutcome::Failure {
                state: node.id.clone(),
            },
        },
        _ => ProcessOutcome::Running,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConflictReason {
    StateMissing,
    NoPathToEnd,
    RoleNotInTarget { role: RoleName },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationConflict {
    pub process_id: ProcessId,
    pub state: StateId,
    pub reason: ConflictReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum MigrationResult {
    Migrated(MigrationMarker),
    Conflict(MigrationConflict),
}

/// Dry run: the conflict `migrate` would report, if any.
pub fn check_migration(process: &SocialProcess, target: &SocialProtocol) -> Option<MigrationConflict> {
    let conflict = |reason| MigrationConflict {
        process_id: process.process_id.clone(),
        state: process.current_state.clone(),
        reason,
    };
    if target.state(process.current_state.as_str()).is_none() {
        return Some(conflict(ConflictReason::StateMissing));
    }
    if process.status == ProcessStatus::Running && !can_terminate_from(target, &process.current_state) {
        return Some(conflict(ConflictReason::NoPathToEnd));
    }
    let unknown_role = process
        .group
        .members
        .values()
        .flatten()
        .find(|r| !target.roles.contains(*r));
    if let Some(role) = unknown_role {
        return Some(conflict(ConflictReason::RoleNotInTarget { role: role.clone() }));
    }
    None
}

/// Re-binds a running process to `target`, keeping its current state.
///
/// On conflict the process is left exactly as it was.
pub fn migrate(
    process: &mut SocialProcess,
    target: &SocialProtocol,
    now: DateTime<Utc>,
) -> Result<MigrationResult, EngineError> {
    require_implemented(target)?;
    process.ensure_mutable()?;
    if let Some(conflict) = check_migration(process, target) {
        return Ok(MigrationResult::Conflict(conflict));
    }
    let marker = MigrationMarker {
        seq: process.next_seq(),
        from_version: process.protocol_version.clone(),
        to_version: target.version.clone(),
        state: process.current_state.clone(),
        timestamp: now,
    };
    process.protocol_version = target.version.clone();
    process.status = status_at(target, &process.current_state);
    process.history.push(HistoryEntry::Migrated(marker.clone()));
    Ok(MigrationResult::Migrated(marker))
}

/// Re-derives the current state from the start state and the history,
/// checking each step against the protocol version in force at that point.
pub fn replay_history<'a, F>(process: &SocialProcess, lookup: F) -> Result<StateId, EngineError>
where
    F: Fn(&VersionId) -> Option<&'a SocialProtocol>,
{
    let initial_version = process
        .history
        .iter()
        .find_map(|e| match e {
            HistoryEntry::Migrated(m) => Some(m.from_version.clone()),
            HistoryEntry::Transition(_) => None,
        })
        .unwrap_or_else(|| process.protocol_version.clone());
    let mut version = initial_version;
    let mut state = process.start_state.clone();
    for entry in &process.history {
        let protocol = lookup(&version)
            .ok_or_else(|| EngineError::HistoryMismatch(format!("unknown version {version}")))?;
        match entry {
            HistoryEntry::Transition(event) => {
                let transition = protocol.transition(event.transition_id.as_str()).ok_or_else(|| {
                    EngineError::HistoryMismatch(format!(
                        "transition {} not in {version}",
                        event.transition_id
                    ))
                })?;
                if event.from != state || transition.from != state {
                    return Err(EngineError::HistoryMismatch(format!(
                        "event #{} leaves {} but the process was at {state}",
                        event.seq, event.from
                    )));
                }
                if event.action_result.is_ok() {
                    state = transition.to.clone();
                }
            }
            HistoryEntry::Migrated(marker) => {
                if marker.from_version != version || marker.state != state {
                    return Err(EngineError::HistoryMismatch(format!(
                        "migration #{} does not match replayed position",
                        marker.seq
                    )));
                }
                version = marker.to_version.clone();
            }
        }
    }
    if version != process.protocol_version {
        return Err(EngineError::HistoryMismatch(format!(
            "replay ends on {version}, process is ruled by {}",
            process.protocol_version
        )));
    }
    Ok(state)
}
