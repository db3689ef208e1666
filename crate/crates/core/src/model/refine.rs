//! The refinement ladder: abstract, semi-implemented, implemented.

use std::collections::BTreeMap;

use super::types::{Endpoint, RefinementLevel, RoleBinding, SocialProtocol};
use super::validate::validate_structure;
use super::ModelError;
use crate::ids::TransitionId;

fn require_valid(protocol: &SocialProtocol) -> Result<(), ModelError> {
    let report = validate_structure(protocol);
    if report.valid {
        Ok(())
    } else {
        Err(ModelError::InvalidProtocol(report.error_summary()))
    }
}

/// Level of a structurally valid protocol.
pub fn refinement_level(protocol: &SocialProtocol) -> Result<RefinementLevel, ModelError> {
    require_valid(protocol)?;
    Ok(level_unchecked(protocol))
}

pub(crate) fn level_unchecked(protocol: &SocialProtocol) -> RefinementLevel {
    let actions_bound = protocol
        .transitions
        .iter()
        .all(|t| t.action.binding.is_some());
    let roles_bound = protocol.roles.iter().all(|r| {
        protocol
            .role_bindings
            .get(r)
            .is_some_and(|members| !members.is_empty())
    });
    if actions_bound && roles_bound {
        RefinementLevel::Implemented
    } else if !protocol.has_any_binding() {
        RefinementLevel::Abstract
    } else {
        RefinementLevel::SemiImplemented
    }
}

/// Merges role and action bindings into a copy of `protocol`.
///
/// Empty inputs return the protocol unchanged, version included.
pub fn implement(
    protocol: &SocialProtocol,
    role_bindings: &[RoleBinding],
    action_bindings: &BTreeMap<TransitionId, String>,
) -> Result<SocialProtocol, ModelError> {
    require_valid(protocol)?;
    let mut out = protocol.clone();
    for binding in role_bindings {
        if !out.roles.contains(&binding.role) {
            return Err(ModelError::UnknownRole(binding.role.clone()));
        }
        if binding.collaborators.is_empty() {
            return Err(ModelError::EmptyRoleBinding(binding.role.clone()));
        }
        out.role_bindings
            .entry(binding.role.clone())
            .or_default()
            .extend(binding.collaborators.iter().cloned());
    }
    for (id, uri) in action_bindings {
        let endpoint = Endpoint::parse(uri)?;
        let t = out
            .transitions
            .iter_mut()
            .find(|t| &t.id == id)
            .ok_or_else(|| ModelError::UnknownTransition(id.clone()))?;
        t.action.binding = Some(endpoint);
    }
    if role_bindings.is_empty() && action_bindings.is_empty() {
        return Ok(out);
    }
    out.parent_version = Some(protocol.version.clone());
    Ok(out.sealed())
}

/// Strips every binding. Already-abstract input comes back as-is.
pub fn extract_abstract(protocol: &SocialProtocol) -> SocialProtocol {
    if !protocol.has_any_binding() {
        return protocol.clone();
    }
    let mut out = protocol.clone();
    out.role_bindings.clear();
    for t in &mut out.transitions {
        t.action.binding = None;
    }
    out.parent_version = Some(protocol.version.clone());
    out.sealed()
}
