//! Test-only oracles and generators shared by the integration targets.
//!
//! The reachability oracle uses a Warshall transitive closure over an
//! adjacency matrix, independent of the BFS used by the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use socproto::engine::Group;
use socproto::ids::{CollaboratorId, RoleName, VersionId};
use socproto::model::{
    ActionSpec, Endpoint, Outcome, SocialProtocol, StateKind, StateNode, Transition,
};

pub const ROLE_POOL: [&str; 3] = ["A", "B", "C"];
pub const ACTION_POOL: [&str; 4] = ["ask", "answer", "close", "note"];
pub const PEOPLE_POOL: [&str; 6] = ["p1", "p2", "p3", "p4", "p5", "p6"];

/// Expected `(code, subject)` pairs for every finding the validator emits.
pub fn oracle_findings(p: &SocialProtocol) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    let mut add = |code: &str, subject: &str| {
        out.insert((code.to_owned(), subject.to_owned()));
    };

    // distinct declared ids, in first-seen order
    let mut ids: Vec<&str> = Vec::new();
    for s in &p.states {
        if ids.contains(&s.id.as_str()) {
            add("DUPLICATE_STATE_ID", s.id.as_str());
        } else {
            ids.push(s.id.as_str());
        }
        if s.outcome.is_some() && s.kind != StateKind::End {
            add("OUTCOME_ON_NON_END_STATE", s.id.as_str());
        }
        if s.kind == StateKind::End && s.outcome.is_none() {
            add("UNLABELED_END_STATE", s.id.as_str());
        }
    }
    let is_kind = |id: &str, kind: StateKind| p.states.iter().any(|s| s.id.as_str() == id && s.kind == kind);
    let starts: Vec<usize> = (0..ids.len()).filter(|&i| is_kind(ids[i], StateKind::Start)).collect();
    let ends: Vec<usize> = (0..ids.len()).filter(|&i| is_kind(ids[i], StateKind::End)).collect();
    if starts.is_empty() {
        add("NO_START_STATE", "");
    }
    if ends.is_empty() {
        add("NO_END_STATE", "");
    }
    for &i in &starts {
        if ends.contains(&i) {
            add("START_END_OVERLAP", ids[i]);
        }
    }

    let index = |id: &str| ids.iter().position(|x| *x == id);
    let n = ids.len();
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    let mut seen_t: Vec<&str> = Vec::new();
    let mut used_roles = BTreeSet::new();
    let mut bound: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for t in &p.transitions {
        if seen_t.contains(&t.id.as_str()) {
            add("DUPLICATE_TRANSITION_ID", t.id.as_str());
        } else {
            seen_t.push(t.id.as_str());
        }
        let from = index(t.from.as_str());
        let to = index(t.to.as_str());
        if from.is_none() || to.is_none() {
            add("DANGLING_TRANSITION_ENDPOINT", t.id.as_str());
        }
        if let (Some(f), Some(g)) = (from, to) {
            reach[f][g] = true;
        }
        if from.is_some_and(|f| ends.contains(&f)) {
            add("EXIT_FROM_END_STATE", t.id.as_str());
        }
        if !p.roles.contains(&t.role) {
            add("UNDECLARED_ROLE", t.id.as_str());
        }
        used_roles.insert(t.role.as_str());
        if let Some(b) = &t.action.binding {
            if url::Url::parse(b.as_str()).is_err() {
                add("INVALID_URI", t.id.as_str());
            }
            bound.entry(t.action.name.as_str()).or_default().insert(b.as_str());
        }
    }
    for r in &p.roles {
        if !used_roles.contains(r.as_str()) {
            add("UNUSED_ROLE", r.as_str());
        }
    }
    for (name, uris) in bound {
        if uris.len() > 1 {
            add("INCONSISTENT_ACTION_BINDING", name);
        }
    }
    for (role, members) in &p.role_bindings {
        if !p.roles.contains(role) {
            add("UNKNOWN_ROLE_BINDING", role.as_str());
        }
        if members.is_empty() {
            add("EMPTY_ROLE_BINDING", role.as_str());
        }
    }

    // Warshall closure
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    for j in 0..n {
        let reachable = starts.iter().any(|&s| reach[s][j]);
        let terminates = ends.iter().any(|&e| reach[j][e]);
        if !reachable {
            add("UNREACHABLE_STATE", ids[j]);
        } else if !terminates {
            add("NO_PATH_TO_END", ids[j]);
        }
    }
    out
}

pub fn oracle_is_valid(findings: &BTreeSet<(String, String)>) -> bool {
    const WARNINGS: [&str; 3] = ["UNUSED_ROLE", "INCONSISTENT_ACTION_BINDING", "UNLABELED_END_STATE"];
    findings.iter().all(|(code, _)| WARNINGS.contains(&code.as_str()))
}

fn kind_strategy() -> impl Strategy<Value = StateKind> {
    prop_oneof![
        Just(StateKind::Start),
        Just(StateKind::Intermediate),
        Just(StateKind::End),
    ]
}

fn endpoint(action: &str, variant: usize) -> Endpoint {
    Endpoint::parse(&format!("http://svc.example/{action}/{variant}")).unwrap()
}

/// Arbitrary, usually invalid protocols with up to 12 states, including
/// duplicate ids, dangling endpoints, and undeclared roles.
pub fn arb_protocol() -> impl Strategy<Value = SocialProtocol> {
    (1usize..=12).prop_flat_map(|n| {
        let states = proptest::collection::vec(
            (0..n + 1, kind_strategy(), proptest::option::of(prop_oneof![Just(Outcome::Success), Just(Outcome::Failure)])),
            1..=n,
        );
        let transitions = proptest::collection::vec(
            (0..6usize, 0..n + 1, 0..n + 1, 0..4usize, 0..4usize, proptest::option::of(0..3usize)),
            0..(n * 2 + 1),
        );
        let roles = proptest::collection::btree_set(0..4usize, 0..4);
        (states, transitions, roles, proptest::collection::btree_map(0..4usize, proptest::collection::btree_set(0..3usize, 0..3), 0..3))
    })
    .prop_map(|(states, transitions, roles, bindings)| {
        let role_name = |i: usize| RoleName::new(["A", "B", "C", "D"][i]);
        SocialProtocol {
            protocol_id: "random".into(),
            version: VersionId::default(),
            parent_version: None,
            states: states
                .into_iter()
                .map(|(i, kind, outcome)| StateNode {
                    id: format!("s{i}").into(),
                    label: String::new(),
                    kind,
                    outcome,
                })
                .collect(),
            transitions: transitions
                .into_iter()
                .map(|(id, from, to, role, action, bind)| {
                    let name = ACTION_POOL[action];
                    Transition {
                        id: format!("t{id}").into(),
                        from: format!("s{from}").into(),
                        to: format!("s{to}").into(),
                        role: role_name(role),
                        action: ActionSpec {
                            name: name.into(),
                            binding: bind.map(|v| endpoint(name, v)),
                        },
                    }
                })
                .collect(),
            roles: roles.into_iter().map(role_name).collect(),
            role_bindings: bindings
                .into_iter()
                .map(|(r, people)| {
                    (
                        role_name(r),
                        people.into_iter().map(|p| CollaboratorId::new(PEOPLE_POOL[p])).collect(),
                    )
                })
                .collect(),
        }
        .sealed()
    })
}

/// Structurally valid abstract protocols over a shared id space.
///
/// States are ordered starts, intermediates, ends. Every non-start state
/// gets an edge from an earlier non-end state and every non-end state gets
/// an edge to a later state, which makes everything reachable both ways.
pub fn arb_valid_abstract() -> impl Strategy<Value = SocialProtocol> {
    (2usize..=12)
        .prop_flat_map(|n| {
            let starts = 1..=(n - 1).min(2);
            (Just(n), starts)
        })
        .prop_flat_map(|(n, s)| {
            let ends = 1..=(n - s).min(3);
            (Just(n), Just(s), ends)
        })
        .prop_flat_map(|(n, s, e)| {
            let picks = proptest::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>()), n);
            let extras = proptest::collection::vec((any::<prop::sample::Index>(), 0..n), 0..n);
            let roles = proptest::collection::vec(0..3usize, 3 * n);
            let actions = proptest::collection::vec(0..4usize, 3 * n);
            let outcomes = proptest::collection::vec(any::<bool>(), e);
            let offset = 0..3usize;
            (Just((n, s, e)), picks, extras, roles, actions, outcomes, offset)
        })
        .prop_map(|((n, s, e), picks, extras, roles, actions, outcomes, offset)| {
            let kind = |i: usize| {
                if i < s {
                    StateKind::Start
                } else if i >= n - e {
                    StateKind::End
                } else {
                    StateKind::Intermediate
                }
            };
            let states: Vec<StateNode> = (0..n)
                .map(|i| {
                    let k = kind(i);
                    let mut node = StateNode::new(format!("s{}", i + offset), format!("state {i}"), k);
                    if k == StateKind::End {
                        node.outcome = Some(if outcomes[i - (n - e)] { Outcome::Success } else { Outcome::Failure });
                    }
                    node
                })
                .collect();
            let non_end = n - e;
            let mut edges: Vec<(usize, usize)> = Vec::new();
            for j in s..n {
                // from an earlier non-end state
                let bound = j.min(non_end);
                edges.push((picks[j].0.index(bound), j));
            }
            for i in 0..non_end {
                let later = n - (i + 1);
                edges.push((i, i + 1 + picks[i].1.index(later)));
            }
            for (from, to) in extras {
                edges.push((from.index(non_end), to));
            }
            edges.sort();
            edges.dedup();
            let transitions: Vec<Transition> = edges
                .iter()
                .enumerate()
                .map(|(k, (f, t))| {
                    Transition::new(
                        format!("t{k}"),
                        format!("s{}", f + offset),
                        format!("s{}", t + offset),
                        ROLE_POOL[roles[k % roles.len()]],
                        ActionSpec::abstract_action(ACTION_POOL[actions[k % actions.len()]]),
                    )
                })
                .collect();
            let roles = transitions.iter().map(|t| t.role.clone()).collect();
            SocialProtocol {
                protocol_id: "generated".into(),
                version: VersionId::default(),
                parent_version: None,
                states,
                transitions,
                roles,
                role_bindings: BTreeMap::new(),
            }
            .sealed()
        })
}

/// Adds random role and action bindings (consistent per action name) to a
/// valid abstract protocol.
pub fn with_random_bindings(p: SocialProtocol) -> impl Strategy<Value = SocialProtocol> {
    let n_roles = p.roles.len();
    let n_trans = p.transitions.len();
    (
        proptest::collection::vec(proptest::option::of(proptest::collection::btree_set(0..6usize, 1..3)), n_roles),
        proptest::collection::vec(any::<bool>(), n_trans),
        0..2usize,
    )
        .prop_map(move |(role_sel, trans_sel, variant)| {
            let mut out = p.clone();
            for (role, sel) in p.roles.iter().zip(role_sel) {
                if let Some(people) = sel {
                    out.role_bindings.insert(
                        role.clone(),
                        people.into_iter().map(|i| CollaboratorId::new(PEOPLE_POOL[i])).collect(),
                    );
                }
            }
            for (t, bind) in out.transitions.iter_mut().zip(trans_sel) {
                if bind {
                    t.action.binding = Some(endpoint(t.action.name.as_str(), variant));
                }
            }
            out.sealed()
        })
}

pub fn arb_valid_protocol() -> impl Strategy<Value = SocialProtocol> {
    arb_valid_abstract().prop_flat_map(with_random_bindings)
}

/// Groups of 2..=6 members holding 1..=3 roles each.
pub fn arb_group() -> impl Strategy<Value = Group> {
    proptest::collection::btree_map(0..6usize, proptest::collection::btree_set(0..3usize, 1..=3), 2..=6).prop_map(
        |members| Group {
            group_id: "g".into(),
            environment_ref: "env".into(),
            members: members
                .into_iter()
                .map(|(c, roles)| {
                    (
                        CollaboratorId::new(PEOPLE_POOL[c]),
                        roles.into_iter().map(|r| RoleName::new(ROLE_POOL[r])).collect(),
                    )
                })
                .collect(),
        },
    )
}

pub fn fixture_path(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

/// Binds every role to a fixed collaborator and every action to an endpoint.
pub fn fully_implemented(p: &SocialProtocol) -> SocialProtocol {
    let mut out = p.clone();
    for (k, role) in p.roles.iter().enumerate() {
        out.role_bindings
            .insert(role.clone(), BTreeSet::from([CollaboratorId::new(PEOPLE_POOL[k])]));
    }
    for t in &mut out.transitions {
        t.action.binding = Some(endpoint(t.action.name.as_str(), 0));
    }
    out.parent_version = Some(p.version.clone());
    out.sealed()
}

/// Implemented two-state protocol declaring every role in `ROLE_POOL`.
pub fn abc_protocol() -> SocialProtocol {
    let transitions = ROLE_POOL
        .iter()
        .map(|r| {
            Transition::new(
                format!("finish-{r}"),
                "open",
                "done",
                *r,
                ActionSpec::abstract_action("close"),
            )
        })
        .collect();
    let abstract_p = SocialProtocol {
        protocol_id: "abc".into(),
        version: VersionId::default(),
        parent_version: None,
        states: vec![
            StateNode::new("open", "Open", StateKind::Start),
            StateNode::new("done", "Done", StateKind::End).with_outcome(Outcome::Success),
        ],
        transitions,
        roles: ROLE_POOL.iter().map(|r| RoleName::new(*r)).collect(),
        role_bindings: BTreeMap::new(),
    }
    .sealed();
    fully_implemented(&abstract_p)
}

pub fn fixed_time() -> chrono::DateTime<chrono::Utc> {
    chrono::DateTime::parse_from_rfc3339("2026-01-05T09:00:00Z")
        .unwrap()
        .with_timezone(&chrono::Utc)
}
