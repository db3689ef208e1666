use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::ids::{ActionName, CollaboratorId, RoleName, StateId, TransitionId, VersionId};

/// Position of a state in the protocol's state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Start,
    Intermediate,
    End,
}

/// How a process that stops in an end state is classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateNode {
    pub id: StateId,
    #[serde(default)]
    pub label: String,
    pub kind: StateKind,
    /// Only meaningful on end states.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
}

impl StateNode {
    pub fn new(id: impl Into<StateId>, label: impl Into<String>, kind: StateKind) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            kind,
            outcome: None,
        }
    }

    pub fn with_outcome(mut self, outcome: Outcome) -> Self {
        self.outcome = Some(outcome);
        self
    }
}

/// An absolute URI naming the service that implements an action.
///
/// Deserialization does not check syntax so that invalid documents can still
/// be loaded and reported on by validation; [`Endpoint::parse`] does.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Endpoint(pub(crate) String);

impl Endpoint {
    pub fn parse(raw: &str) -> Result<Self, ModelError> {
        let endpoint = Self(raw.to_owned());
        if endpoint.is_valid() {
            Ok(endpoint)
        } else {
            Err(ModelError::InvalidUri(raw.to_owned()))
        }
    }

    /// `url` only accepts absolute URIs, which is exactly the invariant.
    pub fn is_valid(&self) -> bool {
        url::Url::parse(&self.0).is_ok()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub name: ActionName,
    /// Absent for abstract actions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<Endpoint>,
}

impl ActionSpec {
    pub fn abstract_action(name: impl Into<ActionName>) -> Self {
        Self {
            name: name.into(),
            binding: None,
        }
    }

    pub fn bound(name: impl Into<ActionName>, endpoint: Endpoint) -> Self {
        Self {
            name: name.into(),
            binding: Some(endpoint),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub id: TransitionId,
    pub from: StateId,
    pub to: StateId,
    pub role: RoleName,
    pub action: ActionSpec,
}

impl Transition {
    pub fn new(
        id: impl Into<TransitionId>,
        from: impl Into<StateId>,
        to: impl Into<StateId>,
        role: impl Into<RoleName>,
        action: ActionSpec,
    ) -> Self {
        Self {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            role: role.into(),
            action,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleBinding {
    pub role: RoleName,
    pub collaborators: BTreeSet<CollaboratorId>,
}

impl RoleBinding {
    pub fn new<I, C>(role: impl Into<RoleName>, collaborators: I) -> Self
    where
        I: IntoIterator<Item = C>,
        C: Into<CollaboratorId>,
    {
        Self {
            role: role.into(),
            collaborators: collaborators.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RefinementLevel {
    Abstract,
    SemiImplemented,
    Implemented,
}

impl fmt::Display for RefinementLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RefinementLevel::Abstract => "abstract",
            RefinementLevel::SemiImplemented => "semi-implemented",
            RefinementLevel::Implemented => "implemented",
        })
    }
}

/// A role-gated finite state machine, at any refinement level.
///
/// States and transitions are kept as lists rather than maps so that
/// malformed documents (duplicate ids, dangling references) survive loading
/// and can be reported by [`validate_structure`](super::validate_structure).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocialProtocol {
    pub protocol_id: String,
    /// Content hash; empty until [`SocialProtocol::sealed`] is called.
    #[serde(default)]
    pub version: VersionId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_version: Option<VersionId>,
    pub states: Vec<StateNode>,
    pub transitions: Vec<Transition>,
    pub roles: BTreeSet<RoleName>,
    #[serde(default)]
    pub role_bindings: BTreeMap<RoleName, BTreeSet<CollaboratorId>>,
}

impl SocialProtocol {
    pub fn state(&self, id: &str) -> Option<&StateNode> {
        self.states.iter().find(|s| s.id.as_str() == id)
    }

    pub fn transition(&self, id: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.id.as_str() == id)
    }

    pub fn start_states(&self) -> impl Iterator<Item = &StateId> {
        self.states
            .iter()
            .filter(|s| s.kind == StateKind::Start)
            .map(|s| &s.id)
    }

    pub fn end_states(&self) -> impl Iterator<Item = &StateId> {
        self.states
            .iter()
            .filter(|s| s.kind == StateKind::End)
            .map(|s| &s.id)
    }

    pub fn is_end_state(&self, id: &str) -> bool {
        self.states
            .iter()
            .any(|s| s.id.as_str() == id && s.kind == StateKind::End)
    }

    /// Distinct abstract action names used by any transition.
    pub fn action_names(&self) -> BTreeSet<ActionName> {
        self.transitions
            .iter()
            .map(|t| t.action.name.clone())
            .collect()
    }

    pub fn role_bindings(&self) -> Vec<RoleBinding> {
        self.role_bindings
            .iter()
            .map(|(role, members)| RoleBinding {
                role: role.clone(),
                collaborators: members.clone(),
            })
            .collect()
    }

    pub fn has_any_binding(&self) -> bool {
        !self.role_bindings.is_empty() || self.transitions.iter().any(|t| t.action.binding.is_some())
    }

    /// Parses a protocol document. A missing `version` is computed; a
    /// present one must match the content hash.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let protocol: SocialProtocol =
            serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        let computed = protocol.compute_version();
        if !protocol.version.as_str().is_empty() && protocol.version != computed {
            return Err(ModelError::VersionMismatch {
                declared: protocol.version,
                computed,
            });
        }
        Ok(Self {
            version: computed,
            ..protocol
        })
    }

    /// Returns the value with `version` set to its content hash.
    pub fn sealed(mut self) -> Self {
        self.version = self.compute_version();
        self
    }
}
