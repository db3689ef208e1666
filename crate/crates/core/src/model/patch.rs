//! Ordered edit lists over protocols, plus the diff that produces them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::types::{Endpoint, SocialProtocol, StateNode, Transition};
use super::ModelError;
use crate::ids::{CollaboratorId, RoleName, StateId, TransitionId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PatchEdit {
    AddState {
        state: StateNode,
    },
    RemoveState {
        state: StateId,
    },
    AddTransition {
        transition: Transition,
    },
    RemoveTransition {
        transition: TransitionId,
    },
    BindAction {
        transition: TransitionId,
        endpoint: Endpoint,
    },
    UnbindAction {
        transition: TransitionId,
    },
    BindRole {
        role: RoleName,
        collaborators: BTreeSet<CollaboratorId>,
    },
    UnbindRole {
        role: RoleName,
    },
    DeclareRole {
        role: RoleName,
    },
    /// Also drops the role's binding, if any.
    RetractRole {
        role: RoleName,
    },
}

/// The id namespace an edit touches, used by the consistency check.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Target<'a> {
    State(&'a StateId),
    Transition(&'a TransitionId),
    Role(&'a RoleName),
}

impl PatchEdit {
    fn creates(&self) -> Option<Target<'_>> {
        match self {
            PatchEdit::AddState { state } => Some(Target::State(&state.id)),
            PatchEdit::AddTransition { transition } => Some(Target::Transition(&transition.id)),
            PatchEdit::DeclareRole { role } => Some(Target::Role(role)),
            _ => None,
        }
    }

    fn removes(&self) -> Option<Target<'_>> {
        match self {
            PatchEdit::RemoveState { state } => Some(Target::State(state)),
            PatchEdit::RemoveTransition { transition } => Some(Target::Transition(transition)),
            PatchEdit::RetractRole { role } => Some(Target::Role(role)),
            _ => None,
        }
    }

    fn references(&self) -> Vec<Target<'_>> {
        match self {
            PatchEdit::AddState { .. } | PatchEdit::DeclareRole { .. } => vec![],
            PatchEdit::AddTransition { transition } => vec![
                Target::State(&transition.from),
                Target::State(&transition.to),
                Target::Role(&transition.role),
            ],
            PatchEdit::RemoveState { state } => vec![Target::State(state)],
            PatchEdit::RemoveTransition { transition }
            | PatchEdit::BindAction { transition, .. }
            | PatchEdit::UnbindAction { transition } => vec![Target::Transition(transition)],
            PatchEdit::BindRole { role, .. }
            | PatchEdit::UnbindRole { role }
            | PatchEdit::RetractRole { role } => vec![Target::Role(role)],
        }
    }
}

/// A non-empty, internally consistent list of edits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PatchDocument", into = "PatchDocument")]
pub struct ProtocolPatch {
    edits: Vec<PatchEdit>,
}

#[derive(Serialize, Deserialize)]
struct PatchDocument {
    edits: Vec<PatchEdit>,
}

impl TryFrom<PatchDocument> for ProtocolPatch {
    type Error = ModelError;

    fn try_from(doc: PatchDocument) -> Result<Self, Self::Error> {
        ProtocolPatch::new(doc.edits)
    }
}

impl From<ProtocolPatch> for PatchDocument {
    fn from(patch: ProtocolPatch) -> Self {
        PatchDocument { edits: patch.edits }
    }
}

impl ProtocolPatch {
    pub fn new(edits: Vec<PatchEdit>) -> Result<Self, ModelError> {
        if edits.is_empty() {
            return Err(ModelError::EmptyPatch);
        }
        let patch = Self { edits };
        patch.check_consistency()?;
        Ok(patch)
    }

    pub fn edits(&self) -> &[PatchEdit] {
        &self.edits
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: PatchDocument =
            serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        Self::try_from(doc)
    }

    /// No edit may reference an id removed by an earlier edit, unless a
    /// later edit re-created it in between.
    fn check_consistency(&self) -> Result<(), ModelError> {
        let mut removed: BTreeSet<Target<'_>> = BTreeSet::new();
        for (index, edit) in self.edits.iter().enumerate() {
            for target in edit.references() {
                if removed.contains(&target) {
                    return Err(ModelError::InconsistentPatch {
                        edit_index: index,
                        target: target_name(&target),
                    });
                }
            }
            if let Some(target) = edit.removes() {
                removed.insert(target);
            }
            if let Some(target) = edit.creates() {
                removed.remove(&target);
            }
        }
        Ok(())
    }
}

fn target_name(target: &Target<'_>) -> String {
    match target {
        Target::State(id) => format!("state {id}"),
        Target::Transition(id) => format!("transition {id}"),
        Target::Role(id) => format!("role {id}"),
    }
}

/// Applies the edits in order to a copy of `protocol`.
///
/// The result is re-sealed with `parent_version` pointing at the input. It
/// is not validated.
pub fn apply_patch(
    protocol: &SocialProtocol,
    patch: &ProtocolPatch,
) -> Result<SocialProtocol, ModelError> {
    patch.check_consistency()?;
    let mut out = protocol.clone();
    for (index, edit) in patch.edits.iter().enumerate() {
        let missing = |target: String| ModelError::PatchTargetMissing {
            edit_index: index,
            target,
        };
        match edit {
            PatchEdit::AddState { state } => {
                if out.state(state.id.as_str()).is_some() {
                    return Err(ModelError::DuplicateId(format!("state {}", state.id)));
                }
                out.states.push(state.clone());
            }
            PatchEdit::RemoveState { state } => {
                let before = out.states.len();
                out.states.retain(|s| &s.id != state);
                if out.states.len() == before {
                    return Err(missing(format!("state {state}")));
                }
            }
            PatchEdit::AddTransition { transition } => {
                if out.transition(transition.id.as_str()).is_some() {
                    return Err(ModelError::DuplicateId(format!(
                        "transition {}",
                        transition.id
                    )));
                }
                if let Some(binding) = &transition.action.binding {
                    Endpoint::parse(binding.as_str())?;
                }
                out.transitions.push(transition.clone());
            }
            PatchEdit::RemoveTransition { transition } => {
                let before = out.transitions.len();
                out.transitions.retain(|t| &t.id != transition);
                if out.transitions.len() == before {
                    return Err(missing(format!("transition {transition}")));
                }
            }
            PatchEdit::BindAction {
                transition,
                endpoint,
            } => {
                let endpoint = Endpoint::parse(endpoint.as_str())?;
                let t = out
                    .transitions
                    .iter_mut()
                    .find(|t| &t.id == transition)
                    .ok_or_else(|| missing(format!("transition {transition}")))?;
                t.action.binding = Some(endpoint);
            }
            PatchEdit::UnbindAction { transition } => {
                let t = out
                    .transitions
                    .iter_mut()
                    .find(|t| &t.id == transition)
                    .ok_or_else(|| missing(format!("transition {transition}")))?;
                t.action.binding = None;
            }
            PatchEdit::BindRole {
                role,
                collaborators,
            } => {
                if !out.roles.contains(role) {
                    return Err(missing(format!("role {role}")));
                }
                if collaborators.is_empty() {
                    return Err(ModelError::EmptyRoleBinding(role.clone()));
                }
                out.role_bindings.insert(role.clone(), collaborators.clone());
            }
            PatchEdit::UnbindRole { role } => {
                if out.role_bindings.remove(role).is_none() {
                    return Err(missing(format!("role binding {role}")));
                }
            }
            PatchEdit::DeclareRole { role } => {
                if !out.roles.insert(role.clone()) {
                    return Err(ModelError::DuplicateId(format!("role {role}")));
                }
            }
            PatchEdit::RetractRole { role } => {
                if !out.roles.remove(role) {
                    return Err(missing(format!("role {role}")));
                }
                out.role_bindings.remove(role);
            }
        }
    }
    out.parent_version = Some(protocol.version.clone());
    Ok(out.sealed())
}

/// Result of [`diff`]. A patch can't be empty, so "nothing changed" is its
/// own variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolDiff {
    NoChange,
    Patch(ProtocolPatch),
}

impl ProtocolDiff {
    pub fn into_patch(self) -> Option<ProtocolPatch> {
        match self {
            ProtocolDiff::NoChange => None,
            ProtocolDiff::Patch(p) => Some(p),
        }
    }
}

/// Computes edits taking `old` to a protocol structurally equal to `new`.
///
/// Both inputs are expected to have unique state and transition ids.
/// Label-only changes are not structural and produce no edits.
pub fn diff(old: &SocialProtocol, new: &SocialProtocol) -> ProtocolDiff {
    let old_states: BTreeMap<&StateId, &StateNode> = old.states.iter().map(|s| (&s.id, s)).collect();
    let new_states: BTreeMap<&StateId, &StateNode> = new.states.iter().map(|s| (&s.id, s)).collect();
    let old_trans: BTreeMap<&TransitionId, &Transition> =
        old.transitions.iter().map(|t| (&t.id, t)).collect();
    let new_trans: BTreeMap<&TransitionId, &Transition> =
        new.transitions.iter().map(|t| (&t.id, t)).collect();

    let state_changed = |a: &StateNode, b: &StateNode| a.kind != b.kind || a.outcome != b.outcome;
    let shape_changed = |a: &Transition, b: &Transition| {
        a.from != b.from || a.to != b.to || a.role != b.role || a.action.name != b.action.name
    };

    let mut edits = Vec::new();

    // 1. transitions that disappear or change shape
    for (id, t) in &old_trans {
        match new_trans.get(id) {
            Some(n) if !shape_changed(t, n) => {}
            _ => edits.push(PatchEdit::RemoveTransition {
                transition: (*id).clone(),
            }),
        }
    }
    // 2. role bindings that disappear
    for role in old.role_bindings.keys() {
        if !new.role_bindings.contains_key(role) {
            edits.push(PatchEdit::UnbindRole { role: role.clone() });
        }
    }
    // 3. states that disappear or change kind/outcome
    let mut readd_states = Vec::new();
    for (id, s) in &old_states {
        match new_states.get(id) {
            Some(n) if !state_changed(s, n) => {}
            Some(n) => {
                edits.push(PatchEdit::RemoveState {
                    state: (*id).clone(),
                });
                readd_states.push(*n);
            }
            None => edits.push(PatchEdit::RemoveState {
                state: (*id).clone(),
            }),
        }
    }
    // 4-5. role set
    for role in old.roles.difference(&new.roles) {
        edits.push(PatchEdit::RetractRole { role: role.clone() });
    }
    for role in new.roles.difference(&old.roles) {
        edits.push(PatchEdit::DeclareRole { role: role.clone() });
    }
    // 6. new and re-created states
    let mut added: Vec<&StateNode> = new_states
        .iter()
        .filter(|(id, _)| !old_states.contains_key(*id))
        .map(|(_, s)| *s)
        .chain(readd_states)
        .collect();
    added.sort_by(|a, b| a.id.cmp(&b.id));
    for state in added {
        edits.push(PatchEdit::AddState {
            state: state.clone(),
        });
    }
    // 7-8. new/reshaped transitions, then binding-only changes
    let mut rebinds = Vec::new();
    for (id, n) in &new_trans {
        match old_trans.get(id) {
            Some(t) if !shape_changed(t, n) => {
                if t.action.binding != n.action.binding {
                    rebinds.push(match &n.action.binding {
                        Some(endpoint) => PatchEdit::BindAction {
                            transition: (*id).clone(),
                            endpoint: endpoint.clone(),
                        },
                        None => PatchEdit::UnbindAction {
                            transition: (*id).clone(),
                        },
                    });
                }
            }
            _ => edits.push(PatchEdit::AddTransition {
                transition: (*n).clone(),
            }),
        }
    }
    edits.extend(rebinds);
    // 9. role bindings that appear or change
    for (role, members) in &new.role_bindings {
        if old.role_bindings.get(role) != Some(members) {
            edits.push(PatchEdit::BindRole {
                role: role.clone(),
                collaborators: members.clone(),
            });
        }
    }

    if edits.is_empty() {
        ProtocolDiff::NoChange
    } else {
        ProtocolDiff::Patch(ProtocolPatch { edits })
    }
}
