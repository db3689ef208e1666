mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use socproto::engine::*;
use socproto::fixtures;
use socproto::ids::{ActionName, CollaboratorId, GroupId, ProcessId, TransitionId, VersionId};
use socproto::inheritance::*;
use socproto::model::*;
use socproto::negotiation::*;

use common::*;

fn g(id: &str) -> GroupId {
    GroupId::new(id)
}

/// Community with groups A and B on env-g1, the implemented FAQ in the
/// catalog, and its comment adaptation private to A.
struct Setup {
    pvc: PvcState,
    p1: VersionId,
    adapted: VersionId,
}

fn setup_with(patch: &ProtocolPatch) -> Setup {
    let mut pvc = PvcState::new();
    let env = fixtures::env_g1();
    pvc.environments.insert(env.env_id.clone(), env);
    for id in ["A", "B"] {
        pvc.groups.insert(g(id), fixtures::faq_group(id, "env-g1"));
    }
    let p1 = pvc.repository.register_protocol(&fixtures::faq_implemented(), Scope::Catalog).unwrap();
    let adapted = pvc.repository.derive_version(&p1, patch, Some("n1".into()), &g("A")).unwrap();
    Setup { pvc, p1, adapted }
}

fn setup() -> Setup {
    setup_with(&fixtures::comment_both_patch())
}

const PATH: [(&str, &str); 3] = [
    ("john-smith", "t-ask-first"),
    ("jennifer-scott", "t-answer"),
    ("scott-tiger", "t-success"),
];

/// Starts a process of `group` and walks `depth` steps: q0, q1, q2, qS.
fn add_process(pvc: &mut PvcState, id: &str, group: &str, version: &VersionId, depth: usize) {
    let protocol = pvc.repository.get(version).unwrap().clone();
    let mut process = instantiate(id, &protocol, pvc.groups[&g(group)].clone(), None).unwrap();
    for (who, t) in &PATH[..depth] {
        trigger(&mut process, &protocol, &CollaboratorId::new(*who), &TransitionId::new(*t), &MockExecutor::new(), fixed_time()).unwrap();
    }
    pvc.processes.insert(ProcessId::new(id), process);
}

fn catalog(pvc: &PvcState, group: &str) -> BTreeSet<VersionId> {
    catalog_for(pvc, &g(group)).unwrap().into_iter().map(|e| e.version).collect()
}

#[test]
fn registering_is_idempotent_and_validates() {
    let mut repo = ProtocolRepository::new();
    let a = repo.register_protocol(&fixtures::faq(), Scope::Catalog).unwrap();
    let before = repo.clone();
    let b = repo.register_protocol(&fixtures::faq(), Scope::Private(g("A"))).unwrap();
    assert_eq!(a, b);
    assert_eq!(repo, before);
    assert!(a.as_str().starts_with('v') && a.as_str().len() == 21);

    let mut broken = fixtures::faq();
    broken.states.retain(|s| s.id.as_str() != "qS");
    let err = repo.register_protocol(&broken, Scope::Catalog).unwrap_err();
    assert_eq!(err.code(), "INVALID_PROTOCOL");
    assert_eq!(repo, before);
}

#[test]
fn an_implementation_links_to_its_stored_abstract() {
    let mut repo = ProtocolRepository::new();
    let abstract_v = repo.register_protocol(&fixtures::faq(), Scope::Catalog).unwrap();
    let implemented = repo.register_protocol(&fixtures::faq_implemented(), Scope::Catalog).unwrap();
    assert_eq!(repo.parent_of(&implemented).unwrap().parent, abstract_v);
    assert_eq!(repo.lineage(&implemented).unwrap().len(), 1);
}

#[test]
fn derived_versions_are_private_children() {
    let s = setup();
    let repo = &s.pvc.repository;
    assert_eq!(repo.scope(&s.adapted), Some(&Scope::Private(g("A"))));
    let hops = repo.lineage(&s.adapted).unwrap();
    assert_eq!(hops, vec![LineageHop { version: s.p1.clone(), negotiation_ref: Some("n1".into()) }]);
    assert_eq!(repo.lineage(&s.p1).unwrap(), vec![]);
    assert_eq!(repo.export_lineage(Some(&s.adapted)).unwrap(), format!("{} -> {} [n1]\n", s.p1, s.adapted));
    assert_eq!(repo.lineage(&VersionId::new("vnope")).unwrap_err().code(), "UNKNOWN_VERSION");
}

#[test]
fn an_invalid_derivation_is_refused() {
    let mut s = setup();
    let before = s.pvc.repository.clone();
    let patch = ProtocolPatch::new(vec![PatchEdit::RemoveState { state: "qS".into() }]).unwrap();
    let err = s.pvc.repository.derive_version(&s.p1, &patch, None, &g("A")).unwrap_err();
    assert_eq!(err.code(), "ADAPTATION_INVALID");
    assert_eq!(s.pvc.repository, before);
}

#[test]
fn local_keeps_everything_else_unchanged() {
    let mut s = setup();
    add_process(&mut s.pvc, "pB", "B", &s.p1, 2);
    let before = s.pvc.clone();
    let report = propagate(&mut s.pvc, &s.adapted, PropagationStrategy::Local, fixed_time()).unwrap();
    assert!(report.applied && report.migrated.is_empty() && report.catalog_added.is_empty());
    assert_eq!(s.pvc.processes, before.processes);
    assert_eq!(s.pvc.repository.visibility, before.repository.visibility);
    assert_eq!(catalog(&s.pvc, "B"), BTreeSet::from([s.p1.clone()]));
    assert_eq!(catalog(&s.pvc, "A"), BTreeSet::from([s.p1.clone(), s.adapted.clone()]));
}

#[test]
fn global_publishes_without_touching_processes() {
    let mut s = setup();
    add_process(&mut s.pvc, "pB", "B", &s.p1, 2);
    let before = s.pvc.clone();
    let report = propagate(&mut s.pvc, &s.adapted, PropagationStrategy::Global, fixed_time()).unwrap();
    assert_eq!(report.catalog_added, vec![s.adapted.clone()]);
    assert_eq!(s.pvc.processes, before.processes);
    assert_eq!(catalog(&s.pvc, "B"), BTreeSet::from([s.p1.clone(), s.adapted.clone()]));
    let err = propagate(&mut s.pvc, &s.adapted, PropagationStrategy::Local, fixed_time()).unwrap_err();
    assert_eq!(err.code(), "NOT_PRIVATE");
}

#[test]
fn instant_migrates_running_processes_and_retires_the_parent() {
    let mut s = setup();
    add_process(&mut s.pvc, "pB", "B", &s.p1, 2);
    add_process(&mut s.pvc, "pDone", "B", &s.p1, 3);
    let report = propagate(&mut s.pvc, &s.adapted, PropagationStrategy::Instant, fixed_time()).unwrap();
    assert!(report.applied);
    assert_eq!(report.migrated, vec![ProcessId::new("pB")]);
    assert_eq!(report.skipped_complete, vec![ProcessId::new("pDone")]);
    assert_eq!(report.tombstoned, vec![s.p1.clone()]);
    let pb = &s.pvc.processes[&ProcessId::new("pB")];
    assert_eq!(pb.protocol_version, s.adapted);
    assert_eq!(pb.current_state.as_str(), "q2");
    assert_eq!(s.pvc.processes[&ProcessId::new("pDone")].protocol_version, s.p1);
    assert_eq!(catalog(&s.pvc, "B"), BTreeSet::from([s.adapted.clone()]));
    assert!(s.pvc.repository.contains(&s.p1));
    assert_eq!(s.pvc.repository.lineage(&s.adapted).unwrap()[0].version, s.p1);
}

#[test]
fn instant_withdraws_sessions_of_migrated_processes() {
    let mut s = setup();
    add_process(&mut s.pvc, "pB", "B", &s.p1, 2);
    let session = open_negotiation("n2", &s.pvc.processes[&ProcessId::new("pB")], &CollaboratorId::new("amy-tony"), fixtures::comment_expert_patch(), "", fixed_time()).unwrap();
    s.pvc.negotiations.insert(session.session_id.clone(), session);
    let report = propagate(&mut s.pvc, &s.adapted, PropagationStrategy::Instant, fixed_time()).unwrap();
    assert_eq!(report.withdrawn_sessions.len(), 1);
    assert!(s.pvc.negotiations.values().all(|n| n.status == SessionStatus::Withdrawn));
}

#[test]
fn a_single_conflict_aborts_instant() {
    let mut s = setup_with(&fixtures::remove_q1_patch());
    add_process(&mut s.pvc, "pB", "B", &s.p1, 1);
    add_process(&mut s.pvc, "pC", "B", &s.p1, 2);
    let before = s.pvc.to_canonical_json();
    let report = propagate(&mut s.pvc, &s.adapted, PropagationStrategy::Instant, fixed_time()).unwrap();
    assert!(!report.applied);
    assert_eq!(report.conflicts.len(), 1);
    assert_eq!(report.conflicts[0].process_id, ProcessId::new("pB"));
    assert!(report.migrated.is_empty());
    assert_eq!(s.pvc.to_canonical_json(), before);
}

#[test]
fn propagation_preconditions() {
    let mut s = setup();
    assert_eq!(propagate(&mut s.pvc, &s.p1, PropagationStrategy::Global, fixed_time()).unwrap_err().code(), "NO_PARENT");
    assert_eq!(propagate(&mut s.pvc, &VersionId::new("vx"), PropagationStrategy::Global, fixed_time()).unwrap_err().code(), "UNKNOWN_VERSION");
    assert_eq!("sideways".parse::<PropagationStrategy>().unwrap_err().code(), "UNKNOWN_STRATEGY");
    assert_eq!("Instant".parse::<PropagationStrategy>().unwrap(), PropagationStrategy::Instant);
    assert_eq!(catalog_for(&s.pvc, &g("Z")).unwrap_err().code(), "UNKNOWN_GROUP");
}

#[test]
fn catalog_reports_environment_compatibility() {
    let mut s = setup();
    propagate(&mut s.pvc, &s.adapted, PropagationStrategy::Global, fixed_time()).unwrap();
    let env = fixtures::env_g2_without_comment();
    s.pvc.environments.insert(env.env_id.clone(), env);
    s.pvc.groups.insert(g("G2"), Group::new("G2", "env-g2").with_member("ursula", ["Manager"]));
    let entries = catalog_for(&s.pvc, &g("G2")).unwrap();
    let adapted = entries.iter().find(|e| e.version == s.adapted).unwrap();
    assert!(!adapted.compatibility.compatible);
    assert_eq!(adapted.compatibility.missing, BTreeSet::from([ActionName::new("comment")]));
    assert_eq!(adapted.level, RefinementLevel::Implemented);
    let original = entries.iter().find(|e| e.version == s.p1).unwrap();
    assert!(original.compatibility.compatible);
}

fn g2_roles() -> Vec<RoleBinding> {
    vec![
        RoleBinding::new("Normal user", ["ursula"]),
        RoleBinding::new("Expert", ["victor"]),
        RoleBinding::new("Manager", ["walter"]),
    ]
}

#[test]
fn adoption_reports_missing_services() {
    let s = setup();
    let outcome = adopt_cross_environment(&s.pvc.repository, &s.adapted, &fixtures::env_g2_without_comment(), &BTreeMap::new(), &g2_roles()).unwrap();
    assert_eq!(outcome, Adoption::Missing { actions: BTreeSet::from([ActionName::new("comment")]) });
}

#[test]
fn adoption_binds_only_the_target_environment() {
    let s = setup();
    let env = fixtures::env_g2_with_comment();
    let foreign = BTreeMap::from([(ActionName::new("comment"), "http://www.example.org/ws/commentAnswer".to_owned())]);
    let err = adopt_cross_environment(&s.pvc.repository, &s.adapted, &env, &foreign, &g2_roles()).unwrap_err();
    assert_eq!(err.code(), "BINDING_NOT_IN_ENVIRONMENT");

    let unknown = BTreeMap::from([(ActionName::new("dance"), "http://g2.example.net/notes/annotate".to_owned())]);
    let err = adopt_cross_environment(&s.pvc.repository, &s.adapted, &env, &unknown, &g2_roles()).unwrap_err();
    assert_eq!(err.code(), "UNKNOWN_ACTION");

    let err = adopt_cross_environment(&s.pvc.repository, &s.adapted, &env, &BTreeMap::new(), &g2_roles()[..2]).unwrap_err();
    assert_eq!(err.code(), "ROLE_BINDING_MISSING");

    let chosen = BTreeMap::from([(ActionName::new("comment"), "http://g2.example.net/notes/annotate".to_owned())]);
    let Adoption::Candidate { protocol } = adopt_cross_environment(&s.pvc.repository, &s.adapted, &env, &chosen, &g2_roles()).unwrap() else {
        panic!("expected a candidate");
    };
    assert_eq!(refinement_level(&protocol).unwrap(), RefinementLevel::Implemented);
    for t in &protocol.transitions {
        assert!(t.action.binding.as_ref().unwrap().as_str().starts_with("http://g2.example.net/"), "{}", t.id);
    }
    assert_eq!(protocol.roles, s.pvc.repository.get(&s.adapted).unwrap().roles);
    assert!(extract_abstract(&protocol).structurally_eq(&extract_abstract(s.pvc.repository.get(&s.adapted).unwrap())));
}

#[test]
fn history_follows_lineage_and_redacts_for_outsiders() {
    let mut s = setup();
    let group = fixtures::faq_group("A", "env-g1");
    let protocol = s.pvc.repository.get(&s.p1).unwrap().clone();
    let process = instantiate("pA", &protocol, group.clone(), None).unwrap();
    let mut session = open_negotiation("n1", &process, &CollaboratorId::new("bill-bogard"), fixtures::comment_both_patch(), "bill's idea", fixed_time()).unwrap();
    for who in group.members.keys() {
        cast_vote(&mut session, who, &"p1".into(), VoteValue::Accept, fixed_time()).unwrap();
    }
    let mut process = process;
    close_negotiation(&mut session, &mut process, &mut s.pvc.repository, &AcceptanceRule::Unanimity, &CollaboratorId::new("scott-tiger"), fixed_time()).unwrap();
    assert_eq!(session.result_version.as_ref(), Some(&s.adapted));
    let consents: BTreeMap<CollaboratorId, bool> = group.members.keys().map(|c| (c.clone(), c.as_str() != "bill-bogard")).collect();
    s.pvc.repository.add_record(record_history(&session, &consents, fixed_time()).unwrap());

    let own = s.pvc.repository.query_history(&s.adapted, &g("A")).unwrap();
    assert_eq!(own.len(), 1);
    assert!(!own[0].redacted);
    let other = s.pvc.repository.query_history(&s.adapted, &g("B")).unwrap();
    assert!(other[0].redacted);
    let text = serde_json::to_string(&other).unwrap();
    assert!(!text.contains("bill-bogard") && !text.contains("bill's idea"));
    assert!(s.pvc.repository.query_history(&s.p1, &g("B")).unwrap().is_empty());
}

#[derive(Debug, Clone)]
enum Op {
    Derive { parent: usize, patch: usize, owner: bool },
    Propagate { version: usize, strategy: usize },
    Register { variant: usize },
}

fn arb_op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (any::<prop::sample::Index>(), 0..6usize, any::<bool>()).prop_map(|(i, patch, owner)| Op::Derive { parent: i.index(1 << 16), patch, owner }),
        2 => (any::<prop::sample::Index>(), 0..3usize).prop_map(|(i, strategy)| Op::Propagate { version: i.index(1 << 16), strategy }),
        1 => (0..3usize).prop_map(|variant| Op::Register { variant }),
    ]
}

fn pool_patch(k: usize) -> ProtocolPatch {
    match k {
        0 => fixtures::comment_expert_patch(),
        1 => fixtures::comment_both_patch(),
        2 => fixtures::remove_q1_patch(),
        n => ProtocolPatch::new(vec![PatchEdit::AddTransition {
            transition: Transition::new(
                format!("t-extra-{n}"),
                "q2",
                "q2",
                "Expert",
                ActionSpec::bound("comment", Endpoint::parse("http://www.example.org/ws/commentAnswer").unwrap()),
            ),
        }])
        .unwrap(),
    }
}

fn strategy_of(k: usize) -> PropagationStrategy {
    [PropagationStrategy::Local, PropagationStrategy::Global, PropagationStrategy::Instant][k]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    /// Lineage stays a forest: every chain ends at a root, never revisits a
    /// version, and names only stored versions. Catalog visibility only
    /// grows apart from instant tombstones, and tombstoned versions stay
    /// stored.
    #[test]
    fn lineage_is_a_forest_and_catalogs_are_monotone(ops in prop::collection::vec(arb_op(), 1..20)) {
        let mut s = setup();
        add_process(&mut s.pvc, "pB", "B", &s.p1, 2);
        let mut known: Vec<VersionId> = vec![s.p1.clone(), s.adapted.clone()];
        for op in ops {
            let catalog_before: BTreeSet<VersionId> = s.pvc.repository.catalog_versions().cloned().collect();
            let stored_before = s.pvc.repository.versions.len();
            match op {
                Op::Derive { parent, patch, owner } => {
                    let parent = known[parent % known.len()].clone();
                    let owner = if owner { g("A") } else { g("B") };
                    if let Ok(v) = s.pvc.repository.derive_version(&parent, &pool_patch(patch), None, &owner) {
                        if !known.contains(&v) {
                            known.push(v);
                        }
                    }
                    let after: BTreeSet<VersionId> = s.pvc.repository.catalog_versions().cloned().collect();
                    prop_assert_eq!(after, catalog_before);
                }
                Op::Propagate { version, strategy } => {
                    let v = known[version % known.len()].clone();
                    let strategy = strategy_of(strategy);
                    let snapshot = s.pvc.to_canonical_json();
                    match propagate(&mut s.pvc, &v, strategy, fixed_time()) {
                        Ok(report) if report.applied => {
                            let after: BTreeSet<VersionId> = s.pvc.repository.catalog_versions().cloned().collect();
                            let mut expected = catalog_before.clone();
                            if strategy != PropagationStrategy::Local && !s.pvc.repository.catalog_tombstones.contains(&v) {
                                expected.insert(v.clone());
                            }
                            for t in &report.tombstoned {
                                expected.remove(t);
                            }
                            prop_assert_eq!(after, expected);
                        }
                        _ => prop_assert_eq!(s.pvc.to_canonical_json(), snapshot),
                    }
                }
                Op::Register { variant } => {
                    let p = match variant {
                        0 => fixtures::faq(),
                        1 => fixtures::faq_implemented(),
                        _ => fixtures::review(),
                    };
                    let v = s.pvc.repository.register_protocol(&p, Scope::Catalog).unwrap();
                    if !known.contains(&v) {
                        known.push(v);
                    }
                }
            }
            prop_assert!(s.pvc.repository.versions.len() >= stored_before);
            let repo = &s.pvc.repository;
            for v in repo.versions.keys() {
                let hops = repo.lineage(v).unwrap();
                let mut seen = BTreeSet::from([v.clone()]);
                for hop in &hops {
                    prop_assert!(repo.contains(&hop.version));
                    prop_assert!(seen.insert(hop.version.clone()));
                }
                let root = hops.last().map(|h| &h.version).unwrap_or(v);
                prop_assert!(repo.parent_of(root).is_none());
                prop_assert_eq!(repo.export_lineage(Some(v)).unwrap().lines().count(), hops.len());
            }
            for edge in repo.lineage.values() {
                prop_assert!(repo.contains(&edge.parent) && repo.contains(&edge.child));
            }
            prop_assert_eq!(repo.visibility.len(), repo.versions.len());
        }
    }

    /// Instant propagation either migrates every running process on the
    /// parent or changes nothing at all.
    #[test]
    fn instant_is_all_or_nothing(
        depths in prop::collection::vec(0..4usize, 0..8),
        remove_q1 in any::<bool>(),
    ) {
        let patch = if remove_q1 { fixtures::remove_q1_patch() } else { fixtures::comment_both_patch() };
        let mut s = setup_with(&patch);
        for (k, depth) in depths.iter().enumerate() {
            add_process(&mut s.pvc, &format!("p{k}"), if k % 2 == 0 { "A" } else { "B" }, &s.p1, *depth);
        }
        let before = s.pvc.clone();
        let canonical = s.pvc.to_canonical_json();
        let conflicting = remove_q1 && depths.contains(&1);
        let report = propagate(&mut s.pvc, &s.adapted, PropagationStrategy::Instant, fixed_time()).unwrap();
        prop_assert_eq!(report.applied, !conflicting);
        if conflicting {
            prop_assert_eq!(s.pvc.to_canonical_json(), canonical);
            prop_assert_eq!(report.conflicts.len(), depths.iter().filter(|d| **d == 1).count());
        } else {
            for (id, process) in &s.pvc.processes {
                let old = &before.processes[id];
                if old.status == ProcessStatus::Completed {
                    prop_assert_eq!(process, old);
                } else {
                    prop_assert_eq!(&process.protocol_version, &s.adapted);
                    prop_assert_eq!(&process.current_state, &old.current_state);
                    prop_assert!(process.history.starts_with(&old.history));
                    prop_assert_eq!(process.history.len(), old.history.len() + 1);
                }
            }
            prop_assert!(s.pvc.repository.catalog_tombstones.contains(&s.p1));
            prop_assert_eq!(s.pvc.repository.scope(&s.adapted), Some(&Scope::Catalog));
        }
    }
}
