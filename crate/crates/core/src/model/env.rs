use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::types::{Endpoint, SocialProtocol};
use crate::ids::{ActionName, EnvId};

/// Services a group can call, keyed by abstract action name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub env_id: EnvId,
    pub services: BTreeMap<ActionName, BTreeSet<Endpoint>>,
}

impl Environment {
    pub fn new(env_id: impl Into<EnvId>) -> Self {
        Self {
            env_id: env_id.into(),
            services: BTreeMap::new(),
        }
    }

    pub fn with_service(mut self, action: impl Into<ActionName>, endpoint: Endpoint) -> Self {
        self.services
            .entry(action.into())
            .or_default()
            .insert(endpoint);
        self
    }

    /// Names of listed actions with an empty endpoint set.
    pub fn empty_services(&self) -> Vec<&ActionName> {
        self.services
            .iter()
            .filter(|(_, endpoints)| endpoints.is_empty())
            .map(|(name, _)| name)
            .collect()
    }

    pub fn offers(&self, action: &ActionName) -> bool {
        self.services.get(action).is_some_and(|e| !e.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compatibility {
    pub compatible: bool,
    pub missing: BTreeSet<ActionName>,
}

/// Action names are matched case-sensitively.
pub fn check_environment_compatibility(protocol: &SocialProtocol, env: &Environment) -> Compatibility {
    let missing: BTreeSet<ActionName> = protocol
        .action_names()
        .into_iter()
        .filter(|name| !env.offers(name))
        .collect();
    Compatibility {
        compatible: missing.is_empty(),
        missing,
    }
}
