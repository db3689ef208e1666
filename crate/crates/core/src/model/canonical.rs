//! Canonical form, content addressing, and structural equality.
//!
//! Canonical order: states by id, transitions by (from, to, role, action
//! name) with the transition id as tie-breaker, object keys sorted. The
//! version hash covers the canonical document minus its own `version` field.

use serde_json::Value;
use sha2::{Digest, Sha256};

use super::types::{Outcome, SocialProtocol, StateKind};
use crate::ids::{ActionName, CollaboratorId, RoleName, StateId, TransitionId, VersionId};

/// Hex digits of the SHA-256 digest kept in a version id.
const VERSION_HEX_LEN: usize = 20;

impl SocialProtocol {
    /// Copy with states and transitions in canonical order.
    pub fn canonicalized(&self) -> SocialProtocol {
        let mut out = self.clone();
        out.states.sort_by(|a, b| {
            (&a.id, a.kind, a.outcome, &a.label).cmp(&(&b.id, b.kind, b.outcome, &b.label))
        });
        out.transitions.sort_by(|a, b| {
            (&a.from, &a.to, &a.role, &a.action.name, &a.id, &a.action.binding).cmp(&(
                &b.from,
                &b.to,
                &b.role,
                &b.action.name,
                &b.id,
                &b.action.binding,
            ))
        });
        out
    }

    pub fn canonical_value(&self) -> Value {
        // serde_json's default map is ordered, which gives sorted keys.
        serde_json::to_value(self.canonicalized()).expect("protocol serializes to JSON")
    }

    /// Pretty, key-sorted, LF-terminated document: the on-disk format.
    pub fn to_canonical_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.canonical_value())
            .expect("JSON value serializes");
        text.push('\n');
        text
    }

    pub fn compute_version(&self) -> VersionId {
        let mut value = self.canonical_value();
        if let Value::Object(map) = &mut value {
            map.remove("version");
        }
        let bytes = serde_json::to_vec(&value).expect("JSON value serializes");
        let digest = Sha256::digest(&bytes);
        let hex = hex::encode(digest);
        VersionId::new(format!("v{}", &hex[..VERSION_HEX_LEN]))
    }

    /// Identity used for structural equality: ignores version ids, the
    /// protocol name, and display labels.
    pub fn structure(&self) -> Structure {
        let mut states: Vec<_> = self
            .states
            .iter()
            .map(|s| (s.id.clone(), s.kind, s.outcome))
            .collect();
        states.sort();
        let mut transitions: Vec<_> = self
            .transitions
            .iter()
            .map(|t| StructuralTransition {
                from: t.from.clone(),
                to: t.to.clone(),
                role: t.role.clone(),
                action: t.action.name.clone(),
                id: t.id.clone(),
                binding: t.action.binding.as_ref().map(|e| e.as_str().to_owned()),
            })
            .collect();
        transitions.sort();
        Structure {
            roles: self.roles.iter().cloned().collect(),
            states,
            transitions,
            role_bindings: self
                .role_bindings
                .iter()
                .map(|(r, m)| (r.clone(), m.iter().cloned().collect()))
                .collect(),
        }
    }

    pub fn structurally_eq(&self, other: &SocialProtocol) -> bool {
        self.structure() == other.structure()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct StructuralTransition {
    pub from: StateId,
    pub to: StateId,
    pub role: RoleName,
    pub action: ActionName,
    pub id: TransitionId,
    pub binding: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    pub roles: Vec<RoleName>,
    pub states: Vec<(StateId, StateKind, Option<Outcome>)>,
    pub transitions: Vec<StructuralTransition>,
    pub role_bindings: Vec<(RoleName, Vec<CollaboratorId>)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::types::{ActionSpec, StateNode, Transition};

    fn tiny() -> SocialProtocol {
        SocialProtocol {
            protocol_id: "tiny".into(),
            version: VersionId::default(),
            parent_version: None,
            states: vec![
                StateNode::new("z", "Z", StateKind::End),
                StateNode::new("a", "A", StateKind::Start),
            ],
            transitions: vec![Transition::new(
                "t",
                "a",
                "z",
                "R",
                ActionSpec::abstract_action("go"),
            )],
            roles: [RoleName::from("R")].into(),
            role_bindings: Default::default(),
        }
    }

    #[test]
    fn version_ignores_declaration_order() {
        let a = tiny();
        let mut b = tiny();
        b.states.reverse();
        assert_eq!(a.compute_version(), b.compute_version());
        assert!(a.compute_version().as_str().starts_with('v'));
    }

    #[test]
    fn version_changes_with_labels_but_structure_does_not() {
        let a = tiny();
        let mut b = tiny();
        b.states[0].label = "Elsewhere".into();
        assert_ne!(a.compute_version(), b.compute_version());
        assert!(a.structurally_eq(&b));
    }

    #[test]
    fn canonical_json_has_sorted_keys_and_trailing_lf() {
        let text = tiny().sealed().to_canonical_json();
        assert!(text.ends_with("}\n"));
        assert!(!text.contains('\r'));
        let parent = text.find("\"parent_version\"");
        assert!(parent.is_none());
        let keys: Vec<usize> = ["\"protocol_id\"", "\"role_bindings\"", "\"roles\"", "\"states\"", "\"transitions\"", "\"version\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        // states sorted by id
        assert!(text.find("\"a\"").unwrap() < text.find("\"z\"").unwrap());
    }

    #[test]
    fn sealed_document_round_trips_through_from_json() {
        let sealed = tiny().sealed();
        let parsed = SocialProtocol::from_json(&sealed.to_canonical_json()).unwrap();
        assert_eq!(parsed.version, sealed.version);
        assert_eq!(parsed.to_canonical_json(), sealed.to_canonical_json());
    }

    #[test]
    fn tampered_version_is_rejected() {
        let mut sealed = tiny().sealed();
        sealed.version = VersionId::new("v0000");
        let err = SocialProtocol::from_json(&serde_json::to_string(&sealed).unwrap()).unwrap_err();
        assert_eq!(err.code(), "VERSION_MISMATCH");
    }
}
