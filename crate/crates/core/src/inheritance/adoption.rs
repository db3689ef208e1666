use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::repository::ProtocolRepository;
use super::InheritanceError;
use crate::ids::{ActionName, TransitionId, VersionId};
use crate::model::{extract_abstract, implement, level_unchecked, Environment, RefinementLevel, RoleBinding, SocialProtocol};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum Adoption {
    /// Implemented protocol bound to the adopting environment's services.
    Candidate { protocol: SocialProtocol },
    /// Unbound actions the environment cannot serve.
    Missing { actions: BTreeSet<ActionName> },
}

/// Implements a stored version against another group's environment.
///
/// Implemented versions are first reduced to their abstract protocol, so
/// the adopting group never inherits the original group's bindings.
/// `chosen` picks an endpoint per action name; unchosen actions take the
/// environment's first endpoint in sort order.
pub fn adopt_cross_environment(
    repo: &ProtocolRepository,
    version: &VersionId,
    env: &Environment,
    chosen: &BTreeMap<ActionName, String>,
    role_bindings: &[RoleBinding],
) -> Result<Adoption, InheritanceError> {
    let stored = repo.get(version)?;
    let base = match level_unchecked(stored) {
        RefinementLevel::Implemented => extract_abstract(stored),
        _ => stored.clone(),
    };
    let unbound: BTreeSet<ActionName> = base
        .transitions
        .iter()
        .filter(|t| t.action.binding.is_none())
        .map(|t| t.action.name.clone())
        .collect();
    let missing: BTreeSet<ActionName> = unbound.iter().filter(|a| !env.offers(a)).cloned().collect();
    if !missing.is_empty() {
        return Ok(Adoption::Missing { actions: missing });
    }
    for (action, uri) in chosen {
        if !unbound.contains(action) {
            return Err(InheritanceError::UnknownAction(action.clone()));
        }
        let offered = env.services.get(action).is_some_and(|set| set.iter().any(|e| e.as_str() == uri));
        if !offered {
            return Err(InheritanceError::BindingNotInEnvironment {
                action: action.clone(),
                uri: uri.clone(),
            });
        }
    }
    let action_bindings: BTreeMap<TransitionId, String> = base
        .transitions
        .iter()
        .filter(|t| t.action.binding.is_none())
        .map(|t| {
            let uri = chosen.get(&t.action.name).cloned().unwrap_or_else(|| {
                env.services[&t.action.name]
                    .iter()
                    .next()
                    .expect("offered actions have an endpoint")
                    .as_str()
                    .to_owned()
            });
            (t.id.clone(), uri)
        })
        .collect();
    let candidate = implement(&base, role_bindings, &action_bindings)?;
    let unbound_roles: Vec<String> = candidate
        .roles
        .iter()
        .filter(|r| candidate.role_bindings.get(*r).is_none_or(|c| c.is_empty()))
        .map(|r| r.to_string())
        .collect();
    if !unbound_roles.is_empty() {
        return Err(InheritanceError::RoleBindingMissing(unbound_roles));
    }
    Ok(Adoption::Candidate { protocol: candidate })
}
