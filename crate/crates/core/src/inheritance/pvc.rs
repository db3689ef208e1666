use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::repository::{PropagationStrategy, ProtocolRepository, Scope};
use super::InheritanceError;
use crate::engine::{
    check_migration, migrate, require_implemented, Group, MigrationConflict, MigrationResult, ProcessStatus,
    SocialProcess,
};
use crate::ids::{EnvId, GroupId, ProcessId, SessionId, VersionId};
use crate::model::{check_environment_compatibility, level_unchecked, Compatibility, Environment, RefinementLevel};
use crate::negotiation::{withdraw, NegotiationSession};

/// Everything a professional virtual community holds: its teams, their
/// environments and processes, open and past negotiations, and the shared
/// protocol repository.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PvcState {
    pub environments: BTreeMap<EnvId, Environment>,
    pub groups: BTreeMap<GroupId, Group>,
    pub processes: BTreeMap<ProcessId, SocialProcess>,
    pub negotiations: BTreeMap<SessionId, NegotiationSession>,
    pub repository: ProtocolRepository,
}

impl PvcState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pretty JSON with sorted keys and a trailing newline. Two states are
    /// equal exactly when these strings are.
    pub fn to_canonical_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("state serializes");
        text.push('\n');
        text
    }

    pub fn open_session_for(&self, process: &ProcessId) -> Option<&NegotiationSession> {
        self.negotiations
            .values()
            .find(|s| s.is_open() && &s.process_ref == process)
    }

    /// Withdraws any open session on `process`; returns the withdrawn id.
    pub fn withdraw_sessions_of(&mut self, process: &ProcessId, reason: &str, now: DateTime<Utc>) -> Vec<SessionId> {
        self.negotiations
            .values_mut()
            .filter(|s| &s.process_ref == process)
            .filter_map(|s| withdraw(s, reason, now).then(|| s.session_id.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationReport {
    pub strategy: PropagationStrategy,
    pub adapted: VersionId,
    pub parent: VersionId,
    /// False when a conflict aborted an instant propagation.
    pub applied: bool,
    pub migrated: Vec<ProcessId>,
    pub skipped_complete: Vec<ProcessId>,
    pub conflicts: Vec<MigrationConflict>,
    pub catalog_added: Vec<VersionId>,
    pub tombstoned: Vec<VersionId>,
    pub withdrawn_sessions: Vec<SessionId>,
}

/// Spreads an adapted version beyond the group that produced it.
///
/// Instant propagation first dry-runs every migration; a single conflict
/// aborts it with the state untouched and the conflicts in the report.
pub fn propagate(
    pvc: &mut PvcState,
    adapted: &VersionId,
    strategy: PropagationStrategy,
    now: DateTime<Utc>,
) -> Result<PropagationReport, InheritanceError> {
    let repo = &pvc.repository;
    repo.get(adapted)?;
    let parent = repo
        .parent_of(adapted)
        .map(|e| e.parent.clone())
        .ok_or_else(|| InheritanceError::NoParent(adapted.clone()))?;
    if !matches!(repo.scope(adapted), Some(Scope::Private(_))) {
        return Err(InheritanceError::NotPrivate(adapted.clone()));
    }
    let mut report = PropagationReport {
        strategy,
        adapted: adapted.clone(),
        parent: parent.clone(),
        applied: true,
        migrated: Vec::new(),
        skipped_complete: Vec::new(),
        conflicts: Vec::new(),
        catalog_added: Vec::new(),
        tombstoned: Vec::new(),
        withdrawn_sessions: Vec::new(),
    };
    match strategy {
        PropagationStrategy::Local => {
            pvc.repository.propagation.insert(adapted.clone(), strategy);
        }
        PropagationStrategy::Global => {
            let repo = &mut pvc.repository;
            repo.visibility.insert(adapted.clone(), Scope::Catalog);
            repo.propagation.insert(adapted.clone(), strategy);
            report.catalog_added.push(adapted.clone());
        }
        PropagationStrategy::Instant => {
            let target = repo.get(adapted)?.clone();
            require_implemented(&target)?;
            let mut to_migrate = Vec::new();
            for process in pvc.processes.values() {
                if process.protocol_version != parent || process.retired.is_some() {
                    continue;
                }
                if process.status == ProcessStatus::Completed {
                    report.skipped_complete.push(process.process_id.clone());
                    continue;
                }
                match check_migration(process, &target) {
                    Some(conflict) => report.conflicts.push(conflict),
                    None => to_migrate.push(process.process_id.clone()),
                }
            }
            if !report.conflicts.is_empty() {
                report.applied = false;
                return Ok(report);
            }
            let mut next = pvc.clone();
            for id in &to_migrate {
                let process = next.processes.get_mut(id).expect("listed above");
                match migrate(process, &target, now)? {
                    MigrationResult::Migrated(_) => report.migrated.push(id.clone()),
                    MigrationResult::Conflict(conflict) => {
                        // the dry run said otherwise; keep the state untouched
                        report.conflicts.push(conflict);
                        report.applied = false;
                        report.migrated.clear();
                        return Ok(report);
                    }
                }
                report
                    .withdrawn_sessions
                    .extend(next.withdraw_sessions_of(id, "process migrated by instant propagation", now));
            }
            let repo = &mut next.repository;
            repo.visibility.insert(adapted.clone(), Scope::Catalog);
            repo.catalog_tombstones.insert(parent.clone());
            repo.propagation.insert(adapted.clone(), strategy);
            report.catalog_added.push(adapted.clone());
            report.tombstoned.push(parent);
            *pvc = next;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub version: VersionId,
    pub protocol_id: String,
    pub scope: Scope,
    pub level: RefinementLevel,
    pub compatibility: Compatibility,
}

/// Versions a group may pick from: the live catalog plus its own private
/// versions, each checked against the group's environment.
pub fn catalog_for(pvc: &PvcState, group: &GroupId) -> Result<Vec<CatalogEntry>, InheritanceError> {
    let group = pvc
        .groups
        .get(group)
        .ok_or_else(|| InheritanceError::UnknownGroup(group.clone()))?;
    let env = pvc
        .environments
        .get(&group.environment_ref)
        .ok_or_else(|| InheritanceError::UnknownEnvironment(group.environment_ref.clone()))?;
    let repo = &pvc.repository;
    Ok(repo
        .visibility
        .iter()
        .filter(|(v, _)| !repo.catalog_tombstones.contains(*v))
        .filter(|(_, scope)| match scope {
            Scope::Catalog => true,
            Scope::Private(owner) => owner == &group.group_id,
        })
        .map(|(v, scope)| {
            let protocol = &repo.versions[v];
            CatalogEntry {
                version: v.clone(),
                protocol_id: protocol.protocol_id.clone(),
                scope: scope.clone(),
                level: level_unchecked(protocol),
                compatibility: check_environment_compatibility(protocol, env),
            }
        })
        .collect())
}
