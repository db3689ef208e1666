use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::apply::{apply_event, Effect};
use super::events::{Event, EventRecord};
use super::log::{check_record, EventLog};
use super::ServerError;
use crate::engine::{
    available_transitions, check_migration, outcome, run_action, ActionExecutor, Group, MigrationMarker,
    MockExecutor, ProcessOutcome, SocialProcess, TransitionEvent,
};
use crate::ids::{ActionName, CollaboratorId, GroupId, ProcessId, ProposalId, SessionId, StateId, TransitionId, VersionId};
use crate::inheritance::{
    adopt_cross_environment, catalog_for, Adoption, CatalogEntry, InheritanceError, LineageHop, PropagationReport,
    PropagationStrategy, PvcState, Scope,
};
use crate::model::{level_unchecked, Environment, Transition, ProtocolPatch, RefinementLevel, RoleBinding, SocialProtocol};
use crate::negotiation::{AcceptanceRule, CloseOutcome, NegotiationSession, Proposal, RecordView, Tally, VoteValue};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Deterministic clock for scripts and tests: every reading advances by a
/// fixed step.
#[derive(Debug)]
pub struct SteppingClock {
    next: Mutex<DateTime<Utc>>,
    step: Duration,
}

impl SteppingClock {
    pub fn new(start: DateTime<Utc>, step: Duration) -> Self {
        Self {
            next: Mutex::new(start),
            step,
        }
    }
}

impl Default for SteppingClock {
    fn default() -> Self {
        let start = DateTime::parse_from_rfc3339("2026-01-05T09:00:00Z")
            .expect("valid literal")
            .with_timezone(&Utc);
        Self::new(start, Duration::seconds(1))
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> DateTime<Utc> {
        let mut next = self.next.lock().expect("clock lock");
        let now = *next;
        *next = now + self.step;
        now
    }
}

/// Decides who may choose a propagation strategy for a version.
pub trait PropagationPolicy: Send + Sync {
    fn authorize(
        &self,
        state: &PvcState,
        actor: &CollaboratorId,
        version: &VersionId,
        strategy: PropagationStrategy,
    ) -> Result<(), String>;
}

/// Built-in policies, selectable from configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagationAuthority {
    /// Members of the group owning the private version.
    #[default]
    OwnerGroup,
    Anyone,
}

impl std::str::FromStr for PropagationAuthority {
    type Err = ServerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "owner-group" => Ok(PropagationAuthority::OwnerGroup),
            "anyone" => Ok(PropagationAuthority::Anyone),
            other => Err(ServerError::InvalidConfig(format!("unknown propagation authority {other:?}"))),
        }
    }
}

impl PropagationPolicy for PropagationAuthority {
    fn authorize(
        &self,
        state: &PvcState,
        actor: &CollaboratorId,
        version: &VersionId,
        _strategy: PropagationStrategy,
    ) -> Result<(), String> {
        match self {
            PropagationAuthority::Anyone => Ok(()),
            PropagationAuthority::OwnerGroup => match state.repository.scope(version) {
                Some(Scope::Private(owner)) => match state.groups.get(owner) {
                    Some(group) if group.contains(actor) => Ok(()),
                    _ => Err(format!("{actor} is not a member of {owner}, which owns {version}")),
                },
                // the strategy code reports NOT_PRIVATE or UNKNOWN_VERSION
                _ => Ok(()),
            },
        }
    }
}

/// Result of an adoption request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdoptionOutcome {
    #[serde(flatten)]
    pub adoption: Adoption,
    /// Versions stored for the adopting group, abstract first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub registered: Vec<VersionId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessView {
    pub process: SocialProcess,
    pub outcome: ProcessOutcome,
    pub level: RefinementLevel,
}

/// Snapshot of a stored protocol version and its repository metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionView {
    pub version: VersionId,
    pub protocol: SocialProtocol,
    pub scope: Option<Scope>,
    pub level: RefinementLevel,
    pub parent: Option<VersionId>,
    pub tombstoned: bool,
    pub propagation: Option<PropagationStrategy>,
}

/// A community served from an event log.
///
/// Every command applies its event to a copy of the state, appends the
/// event to the log, and only then installs the copy. Failed commands
/// leave both state and log untouched.
pub struct Community {
    state: PvcState,
    log: EventLog,
    clock: Arc<dyn Clock>,
    executor: Arc<dyn ActionExecutor>,
    rule: AcceptanceRule,
    policy: Arc<dyn PropagationPolicy>,
}

impl std::fmt::Debug for Community {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Community")
            .field("events", &self.log.len())
            .field("rule", &self.rule)
            .finish_non_exhaustive()
    }
}

/// Rebuilds community state from log records.
pub fn replay(records: &[EventRecord]) -> Result<PvcState, ServerError> {
    let mut state = PvcState::new();
    for (i, record) in records.iter().enumerate() {
        let corrupt = |m: String| ServerError::CorruptLog(format!("sequence {}: {m}", record.global_seq));
        let event = check_record(record, i as u64 + 1).map_err(corrupt)?;
        let effect = apply_event(&mut state, &event, record.timestamp).map_err(|e| corrupt(format!("{}: {e}", e.code())))?;
        if !event.agrees_with(&effect) {
            return Err(corrupt("recorded outputs differ from the replayed ones".into()));
        }
    }
    Ok(state)
}

impl Community {
    pub fn in_memory() -> Self {
        Self::with_log(EventLog::in_memory()).expect("an empty log replays")
    }

    /// Replays `log` and continues appending to it.
    pub fn with_log(log: EventLog) -> Result<Self, ServerError> {
        let state = replay(log.records())?;
        Ok(Self {
            state,
            log,
            clock: Arc::new(SystemClock),
            executor: Arc::new(MockExecutor::new()),
            rule: AcceptanceRule::default(),
            policy: Arc::new(PropagationAuthority::default()),
        })
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_executor(mut self, executor: Arc<dyn ActionExecutor>) -> Self {
        self.executor = executor;
        self
    }

    pub fn with_rule(mut self, rule: AcceptanceRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn set_rule(&mut self, rule: AcceptanceRule) {
        self.rule = rule;
    }

    pub fn with_policy(mut self, policy: Arc<dyn PropagationPolicy>) -> Self {
        self.policy = policy;
        self
    }

    pub fn state(&self) -> &PvcState {
        &self.state
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn rule(&self) -> AcceptanceRule {
        self.rule
    }

    fn commit_at(&mut self, mut event: Event, now: DateTime<Utc>) -> Result<Effect, ServerError> {
        let mut next = self.state.clone();
        let effect = apply_event(&mut next, &event, now)?;
        event.fill(&effect);
        self.log.append(&event, now)?;
        self.state = next;
        Ok(effect)
    }

    fn commit(&mut self, event: Event) -> Result<Effect, ServerError> {
        let now = self.clock.now();
        self.commit_at(event, now)
    }

    // ---- commands ----

    pub fn register_environment(&mut self, environment: Environment) -> Result<(), ServerError> {
        self.commit(Event::EnvironmentRegistered { environment }).map(|_| ())
    }

    pub fn register_group(&mut self, group: Group) -> Result<(), ServerError> {
        self.commit(Event::GroupRegistered { group }).map(|_| ())
    }

    pub fn register_protocol(&mut self, protocol: SocialProtocol, scope: Scope) -> Result<VersionId, ServerError> {
        let protocol = protocol.sealed();
        if self.state.repository.contains(&protocol.version) {
            return Ok(protocol.version);
        }
        match self.commit(Event::ProtocolRegistered {
            protocol,
            scope,
            version: VersionId::default(),
        })? {
            Effect::Version(v) => Ok(v),
            other => unreachable!("registration produced {other:?}"),
        }
    }

    pub fn derive_version(
        &mut self,
        parent: &VersionId,
        patch: ProtocolPatch,
        owner: &GroupId,
        negotiation_ref: Option<String>,
    ) -> Result<VersionId, ServerError> {
        match self.commit(Event::VersionDerived {
            parent: parent.clone(),
            patch,
            owner: owner.clone(),
            negotiation_ref,
            version: VersionId::default(),
        })? {
            Effect::Version(v) => Ok(v),
            other => unreachable!("derivation produced {other:?}"),
        }
    }

    /// Starts a process for a registered group. Without an explicit id the
    /// next free `p<n>` is used.
    pub fn instantiate(
        &mut self,
        process_id: Option<ProcessId>,
        version: &VersionId,
        group: &GroupId,
        start_state: Option<StateId>,
    ) -> Result<SocialProcess, ServerError> {
        let process_id = process_id.unwrap_or_else(|| {
            (self.state.processes.len() + 1..)
                .map(|n| ProcessId::new(format!("p{n}")))
                .find(|id| !self.state.processes.contains_key(id))
                .expect("unbounded range")
        });
        self.commit(Event::ProcessInstantiated {
            process_id: process_id.clone(),
            version: version.clone(),
            group_id: group.clone(),
            start_state,
        })?;
        Ok(self.state.processes[&process_id].clone())
    }

    /// Runs the action and records the outcome. A failed action is recorded
    /// too, and then reported as `ACTION_FAILED`.
    pub fn trigger(
        &mut self,
        process_id: &ProcessId,
        actor: &CollaboratorId,
        transition: &TransitionId,
    ) -> Result<TransitionEvent, ServerError> {
        let process = self.process(process_id)?;
        let protocol = self.state.repository.get(&process.protocol_version)?;
        let now = self.clock.now();
        let step = run_action(process, protocol, actor, transition, self.executor.as_ref(), now)?;
        if step.action_result.is_ok() {
            self.commit_at(
                Event::TransitionTriggered {
                    process_id: process_id.clone(),
                    event: step.clone(),
                },
                now,
            )?;
            Ok(step)
        } else {
            self.commit_at(
                Event::ActionFailed {
                    process_id: process_id.clone(),
                    event: step.clone(),
                },
                now,
            )?;
            let reason = match &step.action_result {
                crate::engine::ActionResult::Failed { reason } => reason.clone(),
                crate::engine::ActionResult::Ok { .. } => unreachable!(),
            };
            Err(crate::engine::EngineError::ActionFailed {
                transition: transition.clone(),
                reason,
            }
            .into())
        }
    }

    pub fn split(&mut self, process_id: &ProcessId, partition: Vec<BTreeSet<CollaboratorId>>) -> Result<Vec<ProcessId>, ServerError> {
        match self.commit(Event::GroupSplit {
            process_id: process_id.clone(),
            partition,
            children: Vec::new(),
        })? {
            Effect::Children(ids) => Ok(ids),
            other => unreachable!("split produced {other:?}"),
        }
    }

    pub fn merge(&mut self, process_ids: Vec<ProcessId>) -> Result<ProcessId, ServerError> {
        match self.commit(Event::GroupsMerged {
            process_ids,
            merged: ProcessId::default(),
        })? {
            Effect::Process(id) => Ok(id),
            other => unreachable!("merge produced {other:?}"),
        }
    }

    pub fn migrate(&mut self, process_id: &ProcessId, version: &VersionId) -> Result<MigrationMarker, ServerError> {
        let target = self.state.repository.get(version)?;
        if let Some(conflict) = check_migration(self.process(process_id)?, target) {
            return Err(ServerError::MigrationConflict(conflict));
        }
        match self.commit(Event::ProcessMigrated {
            process_id: process_id.clone(),
            version: version.clone(),
        })? {
            Effect::Migrated(marker) => Ok(marker),
            other => unreachable!("migration produced {other:?}"),
        }
    }

    pub fn open_negotiation(
        &mut self,
        process_id: &ProcessId,
        initiator: &CollaboratorId,
        patch: ProtocolPatch,
        rationale: impl Into<String>,
    ) -> Result<NegotiationSession, ServerError> {
        let session_id = (self.state.negotiations.len() + 1..)
            .map(|n| SessionId::new(format!("n{n}")))
            .find(|id| !self.state.negotiations.contains_key(id))
            .expect("unbounded range");
        self.commit(Event::NegotiationOpened {
            session_id: session_id.clone(),
            process_id: process_id.clone(),
            initiator: initiator.clone(),
            patch,
            rationale: rationale.into(),
        })?;
        Ok(self.state.negotiations[&session_id].clone())
    }

    pub fn propose(
        &mut self,
        session: &SessionId,
        proposer: &CollaboratorId,
        patch: ProtocolPatch,
        rationale: impl Into<String>,
        supersedes: &ProposalId,
    ) -> Result<Proposal, ServerError> {
        match self.commit(Event::ProposalMade {
            session_id: session.clone(),
            proposer: proposer.clone(),
            patch,
            rationale: rationale.into(),
            supersedes: supersedes.clone(),
            proposal_id: ProposalId::default(),
        })? {
            Effect::Proposal(p) => Ok(p),
            other => unreachable!("proposal produced {other:?}"),
        }
    }

    pub fn vote(
        &mut self,
        session: &SessionId,
        voter: &CollaboratorId,
        proposal: &ProposalId,
        value: VoteValue,
    ) -> Result<Tally, ServerError> {
        match self.commit(Event::VoteCast {
            session_id: session.clone(),
            voter: voter.clone(),
            proposal_id: proposal.clone(),
            value,
        })? {
            Effect::Tally(t) => Ok(t),
            other => unreachable!("vote produced {other:?}"),
        }
    }

    pub fn set_consent(&mut self, session: &SessionId, participant: &CollaboratorId, consent: bool) -> Result<(), ServerError> {
        self.commit(Event::ConsentSet {
            session_id: session.clone(),
            participant: participant.clone(),
            consent,
        })
        .map(|_| ())
    }

    /// Closes under `rule`, or the configured rule when none is given.
    pub fn close(
        &mut self,
        session: &SessionId,
        closer: &CollaboratorId,
        rule: Option<AcceptanceRule>,
    ) -> Result<CloseOutcome, ServerError> {
        match self.commit(Event::NegotiationClosed {
            session_id: session.clone(),
            closer: closer.clone(),
            rule: rule.unwrap_or(self.rule),
            status: crate::negotiation::SessionStatus::Open,
            result_version: None,
        })? {
            Effect::Closed(outcome) => Ok(outcome),
            other => unreachable!("close produced {other:?}"),
        }
    }

    pub fn record_history(&mut self, session: &SessionId) -> Result<(), ServerError> {
        self.commit(Event::HistoryRecorded {
            session_id: session.clone(),
        })
        .map(|_| ())
    }

    /// Propagates after asking the configured policy. Instant propagation
    /// with conflicts fails with `PROPAGATION_CONFLICT`, carrying the
    /// report, and writes nothing.
    pub fn propagate(
        &mut self,
        actor: &CollaboratorId,
        version: &VersionId,
        strategy: PropagationStrategy,
    ) -> Result<PropagationReport, ServerError> {
        self.policy
            .authorize(&self.state, actor, version, strategy)
            .map_err(ServerError::Forbidden)?;
        match self.commit(Event::Propagated {
            version: version.clone(),
            strategy,
            migrated: Vec::new(),
        })? {
            Effect::Propagated(report) => Ok(report),
            other => unreachable!("propagation produced {other:?}"),
        }
    }

    /// Implements `version` for `group`'s environment. With `register`, the
    /// abstract base (when the stored version was implemented) and the
    /// candidate are stored as private versions of the group.
    pub fn adopt(
        &mut self,
        version: &VersionId,
        group: &GroupId,
        chosen: &BTreeMap<ActionName, String>,
        role_bindings: &[RoleBinding],
        register: bool,
    ) -> Result<AdoptionOutcome, ServerError> {
        let owner = self
            .state
            .groups
            .get(group)
            .ok_or_else(|| InheritanceError::UnknownGroup(group.clone()))?;
        let env = self
            .state
            .environments
            .get(&owner.environment_ref)
            .ok_or_else(|| InheritanceError::UnknownEnvironment(owner.environment_ref.clone()))?;
        let adoption = adopt_cross_environment(&self.state.repository, version, env, chosen, role_bindings)?;
        let mut registered = Vec::new();
        if let (Adoption::Candidate { protocol }, true) = (&adoption, register) {
            let stored = self.state.repository.get(version)?;
            if level_unchecked(stored) == RefinementLevel::Implemented {
                let base = crate::model::extract_abstract(stored);
                registered.push(self.register_protocol(base, Scope::Private(group.clone()))?);
            }
            registered.push(self.register_protocol(protocol.clone(), Scope::Private(group.clone()))?);
        }
        Ok(AdoptionOutcome { adoption, registered })
    }

    // ---- queries ----

    pub fn process(&self, id: &ProcessId) -> Result<&SocialProcess, ServerError> {
        self.state
            .processes
            .get(id)
            .ok_or_else(|| ServerError::UnknownProcess(id.to_string()))
    }

    pub fn process_view(&self, id: &ProcessId) -> Result<ProcessView, ServerError> {
        let process = self.process(id)?;
        let protocol = self.state.repository.get(&process.protocol_version)?;
        Ok(ProcessView {
            process: process.clone(),
            outcome: outcome(process, protocol),
            level: level_unchecked(protocol),
        })
    }

    pub fn session(&self, id: &SessionId) -> Result<&NegotiationSession, ServerError> {
        self.state
            .negotiations
            .get(id)
            .ok_or_else(|| ServerError::UnknownSession(id.to_string()))
    }

    pub fn protocol(&self, version: &VersionId) -> Result<&SocialProtocol, ServerError> {
        Ok(self.state.repository.get(version)?)
    }

    pub fn version_view(&self, version: &VersionId) -> Result<VersionView, ServerError> {
        let repo = &self.state.repository;
        let protocol = repo.get(version)?;
        Ok(VersionView {
            version: version.clone(),
            protocol: protocol.clone(),
            scope: repo.scope(version).cloned(),
            level: level_unchecked(protocol),
            parent: repo.parent_of(version).map(|e| e.parent.clone()),
            tombstoned: repo.catalog_tombstones.contains(version),
            propagation: repo.propagation.get(version).copied(),
        })
    }

    pub fn available(&self, process_id: &ProcessId, collaborator: &CollaboratorId) -> Result<Vec<Transition>, ServerError> {
        let process = self.process(process_id)?;
        let protocol = self.state.repository.get(&process.protocol_version)?;
        Ok(available_transitions(process, protocol, collaborator)?
            .into_iter()
            .cloned()
            .collect())
    }

    pub fn catalog(&self, group: &GroupId) -> Result<Vec<CatalogEntry>, ServerError> {
        Ok(catalog_for(&self.state, group)?)
    }

    pub fn lineage(&self, version: &VersionId) -> Result<Vec<LineageHop>, ServerError> {
        Ok(self.state.repository.lineage(version)?)
    }

    pub fn export_lineage(&self, version: Option<&VersionId>) -> Result<String, ServerError> {
        Ok(self.state.repository.export_lineage(version)?)
    }

    pub fn history(&self, version: &VersionId, group: &GroupId) -> Result<Vec<RecordView>, ServerError> {
        Ok(self.state.repository.query_history(version, group)?)
    }

    pub fn events_since(&self, seq: u64) -> &[EventRecord] {
        self.log.since(seq)
    }

    /// Replays this community's own log and compares the canonical
    /// serialization with the live state.
    pub fn replay_matches(&self) -> Result<bool, ServerError> {
        let replayed = replay(self.log.records())?;
        Ok(replayed.to_canonical_json() == self.state.to_canonical_json())
    }
}
