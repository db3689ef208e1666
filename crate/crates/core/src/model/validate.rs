//! Structural validation of protocol values.
//!
//! Problems are findings in the report, never `Err`s. Reachability uses
//! forward BFS from every start state and reverse BFS from every end state.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::types::{SocialProtocol, StateKind};
use crate::ids::{ActionName, StateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// Finding codes. `as_str` gives the wire form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingCode {
    NoStartState,
    NoEndState,
    StartEndOverlap,
    DuplicateStateId,
    DuplicateTransitionId,
    DanglingTransitionEndpoint,
    ExitFromEndState,
    UnreachableState,
    NoPathToEnd,
    UndeclaredRole,
    InvalidUri,
    EmptyRoleBinding,
    UnknownRoleBinding,
    OutcomeOnNonEndState,
    UnusedRole,
    InconsistentActionBinding,
    UnlabeledEndState,
}

impl FindingCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingCode::NoStartState => "NO_START_STATE",
            FindingCode::NoEndState => "NO_END_STATE",
            FindingCode::StartEndOverlap => "START_END_OVERLAP",
            FindingCode::DuplicateStateId => "DUPLICATE_STATE_ID",
            FindingCode::DuplicateTransitionId => "DUPLICATE_TRANSITION_ID",
            FindingCode::DanglingTransitionEndpoint => "DANGLING_TRANSITION_ENDPOINT",
            FindingCode::ExitFromEndState => "EXIT_FROM_END_STATE",
            FindingCode::UnreachableState => "UNREACHABLE_STATE",
            FindingCode::NoPathToEnd => "NO_PATH_TO_END",
            FindingCode::UndeclaredRole => "UNDECLARED_ROLE",
            FindingCode::InvalidUri => "INVALID_URI",
            FindingCode::EmptyRoleBinding => "EMPTY_ROLE_BINDING",
            FindingCode::UnknownRoleBinding => "UNKNOWN_ROLE_BINDING",
            FindingCode::OutcomeOnNonEndState => "OUTCOME_ON_NON_END_STATE",
            FindingCode::UnusedRole => "UNUSED_ROLE",
            FindingCode::InconsistentActionBinding => "INCONSISTENT_ACTION_BINDING",
            FindingCode::UnlabeledEndState => "UNLABELED_END_STATE",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            FindingCode::UnusedRole
            | FindingCode::InconsistentActionBinding
            | FindingCode::UnlabeledEndState => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: FindingCode,
    pub message: String,
    /// Id of the state, transition, role, or action the finding is about.
    pub subject: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    fn from_findings(mut findings: Vec<Finding>) -> Self {
        findings.sort_by(|a, b| (a.severity, a.code, &a.subject).cmp(&(b.severity, b.code, &b.subject)));
        findings.dedup();
        let valid = findings.iter().all(|f| f.severity != Severity::Error);
        Self { valid, findings }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }

    pub fn has(&self, code: FindingCode) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }

    pub fn has_for(&self, code: FindingCode, subject: &str) -> bool {
        self.findings.iter().any(|f| f.code == code && f.subject == subject)
    }

    /// One-line summary of the error findings.
    pub fn error_summary(&self) -> String {
        self.errors()
            .map(|f| format!("{}({})", f.code, f.subject))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

pub fn validate_structure(protocol: &SocialProtocol) -> ValidationReport {
    let mut findings = Vec::new();
    let mut push = |code: FindingCode, subject: &str, message: String| {
        findings.push(Finding {
            severity: code.severity(),
            code,
            message,
            subject: subject.to_owned(),
        });
    };

    let mut kinds: BTreeMap<&StateId, BTreeSet<StateKind>> = BTreeMap::new();
    let mut seen_states = BTreeSet::new();
    for state in &protocol.states {
        if !seen_states.insert(&state.id) {
            push(
                FindingCode::DuplicateStateId,
                state.id.as_str(),
                format!("state id {:?} declared more than once", state.id.as_str()),
            );
        }
        kinds.entry(&state.id).or_default().insert(state.kind);
        if state.outcome.is_some() && state.kind != StateKind::End {
            push(
                FindingCode::OutcomeOnNonEndState,
                state.id.as_str(),
                "only end states carry an outcome".into(),
            );
        }
        if state.kind == StateKind::End && state.outcome.is_none() {
            push(
                FindingCode::UnlabeledEndState,
                state.id.as_str(),
                "end state has no success/failure outcome; treated as failure".into(),
            );
        }
    }

    let starts: BTreeSet<&StateId> = protocol.start_states().collect();
    let ends: BTreeSet<&StateId> = protocol.end_states().collect();
    if starts.is_empty() {
        push(FindingCode::NoStartState, "", "protocol has no start state".into());
    }
    if ends.is_empty() {
        push(FindingCode::NoEndState, "", "protocol has no end state".into());
    }
    for id in starts.intersection(&ends) {
        push(
            FindingCode::StartEndOverlap,
            id.as_str(),
            "state is both a start and an end state".into(),
        );
    }

    let mut seen_transitions = BTreeSet::new();
    let mut bindings_by_action: BTreeMap<&ActionName, BTreeSet<&str>> = BTreeMap::new();
    let mut used_roles = BTreeSet::new();
    for t in &protocol.transitions {
        if !seen_transitions.insert(&t.id) {
            push(
                FindingCode::DuplicateTransitionId,
                t.id.as_str(),
                format!("transition id {:?} declared more than once", t.id.as_str()),
            );
        }
        for endpoint in [&t.from, &t.to] {
            if !kinds.contains_key(endpoint) {
                push(
                    FindingCode::DanglingTransitionEndpoint,
                    t.id.as_str(),
                    format!("references unknown state {:?}", endpoint.as_str()),
                );
            }
        }
        if ends.contains(&t.from) {
            push(
                FindingCode::ExitFromEndState,
                t.id.as_str(),
                format!("leaves end state {:?}", t.from.as_str()),
            );
        }
        if !protocol.roles.contains(&t.role) {
            push(
                FindingCode::UndeclaredRole,
                t.id.as_str(),
                format!("role {:?} is not declared", t.role.as_str()),
            );
        }
        used_roles.insert(&t.role);
        if let Some(binding) = &t.action.binding {
            if !binding.is_valid() {
                push(
                    FindingCode::InvalidUri,
                    t.id.as_str(),
                    format!("{:?} is not an absolute URI", binding.as_str()),
                );
            }
            bindings_by_action
                .entry(&t.action.name)
                .or_default()
                .insert(binding.as_str());
        }
    }

    for role in &protocol.roles {
        if !used_roles.contains(role) {
            push(
                FindingCode::UnusedRole,
                role.as_str(),
                "declared role is not used by any transition".into(),
            );
        }
    }
    for (action, uris) in &bindings_by_action {
        if uris.len() > 1 {
            push(
                FindingCode::InconsistentActionBinding,
                action.as_str(),
                format!("bound to {} different endpoints", uris.len()),
            );
        }
    }
    for (role, members) in &protocol.role_bindings {
        if !protocol.roles.contains(role) {
            push(
                FindingCode::UnknownRoleBinding,
                role.as_str(),
                "binding for an undeclared role".into(),
            );
        }
        if members.is_empty() {
            push(
                FindingCode::EmptyRoleBinding,
                role.as_str(),
                "role binding names no collaborators".into(),
            );
        }
    }

    let graph = Graph::new(protocol);
    let forward = graph.reach(starts.iter().copied(), Direction::Forward);
    let backward = graph.reach(ends.iter().copied(), Direction::Backward);
    for id in kinds.keys() {
        if !forward.contains(id) {
            push(
                FindingCode::UnreachableState,
                id.as_str(),
                "not reachable from any start state".into(),
            );
        } else if !backward.contains(id) {
            push(
                FindingCode::NoPathToEnd,
                id.as_str(),
                "no end state is reachable from here".into(),
            );
        }
    }

    ValidationReport::from_findings(findings)
}

#[derive(Clone, Copy)]
pub(crate) enum Direction {
    Forward,
    Backward,
}

/// Adjacency over declared states; transitions with a dangling endpoint are
/// ignored.
pub(crate) struct Graph<'a> {
    out: BTreeMap<&'a StateId, Vec<&'a StateId>>,
    inc: BTreeMap<&'a StateId, Vec<&'a StateId>>,
}

impl<'a> Graph<'a> {
    pub(crate) fn new(protocol: &'a SocialProtocol) -> Self {
        let declared: BTreeSet<&StateId> = protocol.states.iter().map(|s| &s.id).collect();
        let mut out: BTreeMap<&StateId, Vec<&StateId>> = BTreeMap::new();
        let mut inc: BTreeMap<&StateId, Vec<&StateId>> = BTreeMap::new();
        for t in &protocol.transitions {
            if declared.contains(&t.from) && declared.contains(&t.to) {
                out.entry(&t.from).or_default().push(&t.to);
                inc.entry(&t.to).or_default().push(&t.from);
            }
        }
        Self { out, inc }
    }

    pub(crate) fn reach(
        &self,
        seeds: impl IntoIterator<Item = &'a StateId>,
        direction: Direction,
    ) -> BTreeSet<&'a StateId> {
        let edges = match direction {
            Direction::Forward => &self.out,
            Direction::Backward => &self.inc,
        };
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<&StateId> = VecDeque::new();
        for seed in seeds {
            if seen.insert(seed) {
                queue.push_back(seed);
            }
        }
        while let Some(node) = queue.pop_front() {
            for &next in edges.get(node).into_iter().flatten() {
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        seen
    }
}

/// True when some end state of `protocol` is reachable from `state`.
pub fn can_terminate_from(protocol: &SocialProtocol, state: &StateId) -> bool {
    if protocol.state(state.as_str()).is_none() {
        return false;
    }
    let graph = Graph::new(protocol);
    let reach = graph.reach([state], Direction::Forward);
    protocol.end_states().any(|e| reach.contains(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::{RoleName, VersionId};
    use crate::model::types::{ActionSpec, Outcome, StateNode, Transition};

    fn protocol(states: Vec<StateNode>, transitions: Vec<Transition>, roles: &[&str]) -> SocialProtocol {
        SocialProtocol {
            protocol_id: "p".into(),
            version: VersionId::default(),
            parent_version: None,
            states,
            transitions,
            roles: roles.iter().map(|r| RoleName::from(*r)).collect(),
            role_bindings: Default::default(),
        }
    }

    fn t(id: &str, from: &str, to: &str, role: &str) -> Transition {
        Transition::new(id, from, to, role, ActionSpec::abstract_action("act"))
    }

    #[test]
    fn start_end_overlap_is_an_error() {
        let p = protocol(
            vec![
                StateNode::new("X", "", StateKind::Start),
                StateNode::new("X", "", StateKind::End).with_outcome(Outcome::Success),
            ],
            vec![],
            &[],
        );
        let report = validate_structure(&p);
        assert!(!report.valid);
        assert!(report.has_for(FindingCode::StartEndOverlap, "X"));
    }

    #[test]
    fn no_transitions_leaves_start_stuck_and_end_unreachable() {
        let p = protocol(
            vec![
                StateNode::new("s", "", StateKind::Start),
                StateNode::new("e", "", StateKind::End).with_outcome(Outcome::Success),
            ],
            vec![],
            &[],
        );
        let report = validate_structure(&p);
        assert!(!report.valid);
        assert!(report.has_for(FindingCode::NoPathToEnd, "s"));
        assert!(report.has_for(FindingCode::UnreachableState, "e"));
        assert_eq!(report.errors().count(), 2);
    }

    #[test]
    fn empty_protocol_reports_missing_start_and_end() {
        let report = validate_structure(&protocol(vec![], vec![], &[]));
        assert!(report.has(FindingCode::NoStartState));
        assert!(report.has(FindingCode::NoEndState));
    }

    #[test]
    fn dangling_exit_and_role_errors() {
        let p = protocol(
            vec![
                StateNode::new("s", "", StateKind::Start),
                StateNode::new("e", "", StateKind::End).with_outcome(Outcome::Failure),
            ],
            vec![
                t("go", "s", "e", "R"),
                t("back", "e", "s", "R"),
                t("lost", "s", "nowhere", "Ghost"),
                t("go", "s", "e", "R"),
            ],
            &["R", "Idle"],
        );
        let report = validate_structure(&p);
        assert!(report.has_for(FindingCode::ExitFromEndState, "back"));
        assert!(report.has_for(FindingCode::DanglingTransitionEndpoint, "lost"));
        assert!(report.has_for(FindingCode::UndeclaredRole, "lost"));
        assert!(report.has_for(FindingCode::DuplicateTransitionId, "go"));
        assert!(report.has_for(FindingCode::UnusedRole, "Idle"));
    }

    #[test]
    fn inconsistent_bindings_are_warnings_only() {
        let mut a = t("a", "s", "e", "R");
        let mut b = t("b", "s", "e", "R");
        a.action.binding = Some(crate::model::Endpoint::parse("http://x/one").unwrap());
        b.action.binding = Some(crate::model::Endpoint::parse("http://x/two").unwrap());
        let p = protocol(
            vec![
                StateNode::new("s", "", StateKind::Start),
                StateNode::new("e", "", StateKind::End).with_outcome(Outcome::Success),
            ],
            vec![a, b],
            &["R"],
        );
        let report = validate_structure(&p);
        assert!(report.valid);
        assert!(report.has_for(FindingCode::InconsistentActionBinding, "act"));
    }

    #[test]
    fn can_terminate_from_follows_edges() {
        let p = protocol(
            vec![
                StateNode::new("s", "", StateKind::Start),
                StateNode::new("m", "", StateKind::Intermediate),
                StateNode::new("e", "", StateKind::End).with_outcome(Outcome::Success),
            ],
            vec![t("a", "s", "m", "R"), t("b", "s", "e", "R")],
            &["R"],
        );
        assert!(can_terminate_from(&p, &"s".into()));
        assert!(!can_terminate_from(&p, &"m".into()));
        assert!(!can_terminate_from(&p, &"zz".into()));
    }
}
