use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::{CollaboratorId, EnvId, GroupId, RoleName};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collaborator {
    pub collaborator_id: CollaboratorId,
    pub display_name: String,
}

/// A virtual team: collaborators with the roles they hold, plus the
/// environment whose services they can use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub group_id: GroupId,
    pub members: BTreeMap<CollaboratorId, BTreeSet<RoleName>>,
    pub environment_ref: EnvId,
}

impl Group {
    pub fn new(group_id: impl Into<GroupId>, environment_ref: impl Into<EnvId>) -> Self {
        Self {
            group_id: group_id.into(),
            members: BTreeMap::new(),
            environment_ref: environment_ref.into(),
        }
    }

    pub fn with_member<I, R>(mut self, collaborator: impl Into<CollaboratorId>, roles: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: Into<RoleName>,
    {
        self.members
            .entry(collaborator.into())
            .or_default()
            .extend(roles.into_iter().map(Into::into));
        self
    }

    /// Inverts protocol role bindings (role → people) into a membership map.
    pub fn from_role_bindings(
        group_id: impl Into<GroupId>,
        environment_ref: impl Into<EnvId>,
        bindings: &BTreeMap<RoleName, BTreeSet<CollaboratorId>>,
    ) -> Self {
        let mut group = Self::new(group_id, environment_ref);
        for (role, people) in bindings {
            for person in people {
                group
                    .members
                    .entry(person.clone())
                    .or_default()
                    .insert(role.clone());
            }
        }
        group
    }

    pub fn roles_of(&self, collaborator: &CollaboratorId) -> Option<&BTreeSet<RoleName>> {
        self.members.get(collaborator)
    }

    pub fn contains(&self, collaborator: &CollaboratorId) -> bool {
        self.members.contains_key(collaborator)
    }

    /// Every (collaborator, role) assignment, sorted.
    pub fn role_pairs(&self) -> Vec<(CollaboratorId, RoleName)> {
        self.members
            .iter()
            .flat_map(|(c, roles)| roles.iter().map(move |r| (c.clone(), r.clone())))
            .collect()
    }
}
