//! The bundled FAQ protocol and its implementation, as shipped in the
//! repository's `fixtures/` directory.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{Collaborator, Group};
use crate::ids::{ActionName, EnvId, GroupId, TransitionId};
use crate::model::{implement, Environment, ModelError, ProtocolPatch, RoleBinding, SocialProtocol};

pub const FAQ_JSON: &str = include_str!("../../../fixtures/faq.json");
pub const FAQ_IMPLEMENTATION_JSON: &str = include_str!("../../../fixtures/faq_implementation.json");
pub const REVIEW_JSON: &str = include_str!("../../../fixtures/review.json");
pub const COMMENT_EXPERT_PATCH_JSON: &str =
    include_str!("../../../fixtures/patches/comment_expert.json");
pub const COMMENT_BOTH_PATCH_JSON: &str =
    include_str!("../../../fixtures/patches/comment_expert_and_user.json");
pub const REMOVE_Q1_PATCH_JSON: &str =
    include_str!("../../../fixtures/patches/remove_waiting_for_answer.json");
pub const ENV_G1_JSON: &str = include_str!("../../../fixtures/environments/g1.json");
pub const ENV_G2_WITHOUT_COMMENT_JSON: &str =
    include_str!("../../../fixtures/environments/g2_without_comment.json");
pub const ENV_G2_WITH_COMMENT_JSON: &str =
    include_str!("../../../fixtures/environments/g2_with_comment.json");

/// Roles-to-people and action-to-endpoint choices for a protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Implementation {
    pub collaborators: Vec<Collaborator>,
    pub role_bindings: Vec<RoleBinding>,
    pub action_endpoints: BTreeMap<ActionName, String>,
}

impl Implementation {
    /// Expands the per-action endpoints into per-transition bindings.
    pub fn action_bindings_for(&self, protocol: &SocialProtocol) -> BTreeMap<TransitionId, String> {
        protocol
            .transitions
            .iter()
            .filter_map(|t| {
                self.action_endpoints
                    .get(&t.action.name)
                    .map(|uri| (t.id.clone(), uri.clone()))
            })
            .collect()
    }

    pub fn apply_to(&self, protocol: &SocialProtocol) -> Result<SocialProtocol, ModelError> {
        implement(protocol, &self.role_bindings, &self.action_bindings_for(protocol))
    }
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> T {
    serde_json::from_str(text).expect("bundled fixture parses")
}

pub fn faq() -> SocialProtocol {
    SocialProtocol::from_json(FAQ_JSON).expect("bundled FAQ parses")
}

pub fn faq_implementation() -> Implementation {
    parse(FAQ_IMPLEMENTATION_JSON)
}

pub fn faq_implemented() -> SocialProtocol {
    faq_implementation()
        .apply_to(&faq())
        .expect("bundled implementation applies")
}

/// A group built from the FAQ role bindings.
pub fn faq_group(group_id: impl Into<GroupId>, env: impl Into<EnvId>) -> Group {
    Group::from_role_bindings(group_id, env, &faq_implemented().role_bindings)
}

pub fn review() -> SocialProtocol {
    SocialProtocol::from_json(REVIEW_JSON).expect("bundled review protocol parses")
}

pub fn comment_expert_patch() -> ProtocolPatch {
    ProtocolPatch::from_json(COMMENT_EXPERT_PATCH_JSON).expect("bundled patch parses")
}

pub fn comment_both_patch() -> ProtocolPatch {
    ProtocolPatch::from_json(COMMENT_BOTH_PATCH_JSON).expect("bundled patch parses")
}

pub fn remove_q1_patch() -> ProtocolPatch {
    ProtocolPatch::from_json(REMOVE_Q1_PATCH_JSON).expect("bundled patch parses")
}

pub fn env_g1() -> Environment {
    parse(ENV_G1_JSON)
}

pub fn env_g2_without_comment() -> Environment {
    parse(ENV_G2_WITHOUT_COMMENT_JSON)
}

pub fn env_g2_with_comment() -> Environment {
    parse(ENV_G2_WITH_COMMENT_JSON)
}
