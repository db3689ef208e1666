//! Split and merge: engine-level operations on the set of processes.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};

use super::group::Group;
use super::process::{ProcessOrigin, RetireReason, Retirement, SocialProcess};
use super::EngineError;
use crate::ids::{CollaboratorId, GroupId, ProcessId};

/// Splits the process's group along `partition`.
///
/// Each part gets a new process (`<id>.1`, `<id>.2`, ...) on the same
/// protocol version and state, with a copy of the history. The parent is
/// retired.
pub fn split_group(
    process: &mut SocialProcess,
    partition: &[BTreeSet<CollaboratorId>],
    now: DateTime<Utc>,
) -> Result<Vec<SocialProcess>, EngineError> {
    process.ensure_mutable()?;
    if partition.len() < 2 {
        return Err(EngineError::InvalidPartition(
            "a split needs at least two parts".into(),
        ));
    }
    let mut seen = BTreeSet::new();
    for part in partition {
        if part.is_empty() {
            return Err(EngineError::InvalidPartition("empty part".into()));
        }
        for member in part {
            if !process.group.contains(member) {
                return Err(EngineError::InvalidPartition(format!(
                    "{member} is not in group {}",
                    process.group.group_id
                )));
            }
            if !seen.insert(member) {
                return Err(EngineError::InvalidPartition(format!(
                    "{member} appears in more than one part"
                )));
            }
        }
    }
    if seen.len() != process.group.members.len() {
        let omitted: Vec<_> = process
            .group
            .members
            .keys()
            .filter(|m| !seen.contains(m))
            .map(|m| m.as_str())
            .collect();
        return Err(EngineError::InvalidPartition(format!(
            "members left out: {}",
            omitted.join(", ")
        )));
    }

    let children: Vec<SocialProcess> = partition
        .iter()
        .enumerate()
        .map(|(i, part)| {
            let n = i + 1;
            let group = Group {
                group_id: GroupId::new(format!("{}.{n}", process.group.group_id)),
                members: process
                    .group
                    .members
                    .iter()
                    .filter(|(c, _)| part.contains(*c))
                    .map(|(c, r)| (c.clone(), r.clone()))
                    .collect(),
                environment_ref: process.group.environment_ref.clone(),
            };
            SocialProcess {
                process_id: ProcessId::new(format!("{}.{n}", process.process_id)),
                group,
                origin: ProcessOrigin::SplitFrom {
                    parent: process.process_id.clone(),
                },
                retired: None,
                ..process.clone()
            }
        })
        .collect();

    process.retired = Some(Retirement {
        reason: RetireReason::Split,
        successors: children.iter().map(|c| c.process_id.clone()).collect(),
        at: now,
    });
    Ok(children)
}

/// Merges processes that share protocol version, current state, and
/// environment into one process whose group is the union of members.
///
/// The merged id joins the sorted input ids with `+`. Inputs are retired.
pub fn merge_groups(
    processes: &mut [&mut SocialProcess],
    now: DateTime<Utc>,
) -> Result<SocialProcess, EngineError> {
    if processes.len() < 2 {
        return Err(EngineError::InvalidMerge(
            "a merge needs at least two processes".into(),
        ));
    }
    processes.sort_by(|a, b| a.process_id.cmp(&b.process_id));
    for pair in processes.windows(2) {
        if pair[0].process_id == pair[1].process_id {
            return Err(EngineError::InvalidMerge(format!(
                "{} listed twice",
                pair[0].process_id
            )));
        }
    }
    for p in processes.iter() {
        p.ensure_mutable()?;
    }
    let first = &processes[0];
    for p in processes.iter().skip(1) {
        if p.protocol_version != first.protocol_version {
            return Err(EngineError::ProtocolMismatch {
                left: first.protocol_version.clone(),
                right: p.protocol_version.clone(),
            });
        }
        if p.current_state != first.current_state {
            return Err(EngineError::StateMismatch {
                left: first.current_state.clone(),
                right: p.current_state.clone(),
            });
        }
        if p.group.environment_ref != first.group.environment_ref {
            return Err(EngineError::EnvironmentMismatch {
                left: first.group.environment_ref.clone(),
                right: p.group.environment_ref.clone(),
            });
        }
    }

    let ids: Vec<ProcessId> = processes.iter().map(|p| p.process_id.clone()).collect();
    let join = |parts: Vec<&str>| parts.join("+");
    let mut group = Group {
        group_id: GroupId::new(join(processes.iter().map(|p| p.group.group_id.as_str()).collect())),
        members: Default::default(),
        environment_ref: first.group.environment_ref.clone(),
    };
    for p in processes.iter() {
        for (member, roles) in &p.group.members {
            group
                .members
                .entry(member.clone())
                .or_default()
                .extend(roles.iter().cloned());
        }
    }
    let merged = SocialProcess {
        process_id: ProcessId::new(join(ids.iter().map(|i| i.as_str()).collect())),
        group,
        origin: ProcessOrigin::MergedFrom {
            sources: ids.clone(),
        },
        retired: None,
        ..(*processes[0]).clone()
    };
    for p in processes.iter_mut() {
        p.retired = Some(Retirement {
            reason: RetireReason::Merge,
            successors: vec![merged.process_id.clone()],
            at: now,
        });
    }
    Ok(merged)
}
