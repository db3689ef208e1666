use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::InheritanceError;
use crate::ids::{GroupId, VersionId};
use crate::model::{apply_patch, validate_structure, ProtocolPatch, SocialProtocol};
use crate::negotiation::{NegotiationRecord, RecordView};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "scope", content = "group", rename_all = "lowercase")]
pub enum Scope {
    Private(GroupId),
    Catalog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagationStrategy {
    Local,
    Global,
    Instant,
}

impl std::str::FromStr for PropagationStrategy {
    type Err = InheritanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "local" => Ok(PropagationStrategy::Local),
            "global" => Ok(PropagationStrategy::Global),
            "instant" => Ok(PropagationStrategy::Instant),
            _ => Err(InheritanceError::UnknownStrategy(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageEdge {
    pub parent: VersionId,
    pub child: VersionId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negotiation_ref: Option<String>,
}

/// One step up the lineage: an ancestor and the negotiation that produced
/// its child on the path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageHop {
    pub version: VersionId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negotiation_ref: Option<String>,
}

/// Every protocol version the community has seen, how they descend from
/// each other, who may see them, and the negotiation history.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolRepository {
    pub versions: BTreeMap<VersionId, SocialProtocol>,
    /// Keyed by child: a version has at most one parent.
    pub lineage: BTreeMap<VersionId, LineageEdge>,
    pub visibility: BTreeMap<VersionId, Scope>,
    pub catalog_tombstones: BTreeSet<VersionId>,
    pub propagation: BTreeMap<VersionId, PropagationStrategy>,
    pub history: Vec<NegotiationRecord>,
}

impl ProtocolRepository {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, version: &VersionId) -> Result<&SocialProtocol, InheritanceError> {
        self.versions
            .get(version)
            .ok_or_else(|| InheritanceError::UnknownVersion(version.clone()))
    }

    pub fn contains(&self, version: &VersionId) -> bool {
        self.versions.contains_key(version)
    }

    pub fn scope(&self, version: &VersionId) -> Option<&Scope> {
        self.visibility.get(version)
    }

    pub fn parent_of(&self, version: &VersionId) -> Option<&LineageEdge> {
        self.lineage.get(version)
    }

    /// Stores a valid protocol under its content hash. Registering the same
    /// content again returns the existing id and changes nothing. When the
    /// protocol's parent is already stored, the two are linked.
    pub fn register_protocol(&mut self, protocol: &SocialProtocol, scope: Scope) -> Result<VersionId, InheritanceError> {
        let report = validate_structure(protocol);
        if !report.valid {
            return Err(crate::model::ModelError::InvalidProtocol(report.error_summary()).into());
        }
        let protocol = protocol.clone().sealed();
        let id = protocol.version.clone();
        if self.versions.contains_key(&id) {
            return Ok(id);
        }
        if let Some(parent) = protocol.parent_version.clone() {
            if self.versions.contains_key(&parent) {
                self.link(parent, id.clone(), None)?;
            }
        }
        self.versions.insert(id.clone(), protocol);
        self.visibility.insert(id.clone(), scope);
        Ok(id)
    }

    /// Applies `patch` to `parent` and stores the valid result as a child,
    /// private to `owner`.
    pub fn derive_version(
        &mut self,
        parent: &VersionId,
        patch: &ProtocolPatch,
        negotiation_ref: Option<String>,
        owner: &GroupId,
    ) -> Result<VersionId, InheritanceError> {
        let base = self.get(parent)?;
        let child = apply_patch(base, patch)
            .map_err(|e| InheritanceError::AdaptationInvalid(format!("{}: {e}", e.code())))?;
        let report = validate_structure(&child);
        if !report.valid {
            return Err(InheritanceError::AdaptationInvalid(report.error_summary()));
        }
        let id = child.version.clone();
        if self.versions.contains_key(&id) {
            return Ok(id);
        }
        self.link(parent.clone(), id.clone(), negotiation_ref)?;
        self.versions.insert(id.clone(), child);
        self.visibility.insert(id.clone(), Scope::Private(owner.clone()));
        Ok(id)
    }

    fn link(&mut self, parent: VersionId, child: VersionId, negotiation_ref: Option<String>) -> Result<(), InheritanceError> {
        if parent == child || self.ancestors(&parent).contains(&child) {
            return Err(InheritanceError::LineageCycle { parent, child });
        }
        self.lineage.entry(child.clone()).or_insert(LineageEdge {
            parent,
            child,
            negotiation_ref,
        });
        Ok(())
    }

    fn ancestors(&self, version: &VersionId) -> Vec<VersionId> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut cursor = version;
        while let Some(edge) = self.lineage.get(cursor) {
            if !seen.insert(edge.parent.clone()) {
                break;
            }
            out.push(edge.parent.clone());
            cursor = &edge.parent;
        }
        out
    }

    /// Ancestors from nearest to root, each with the negotiation that led
    /// to the next version down.
    pub fn lineage(&self, version: &VersionId) -> Result<Vec<LineageHop>, InheritanceError> {
        self.get(version)?;
        let mut hops = Vec::new();
        let mut cursor = version;
        let mut seen = BTreeSet::from([version.clone()]);
        while let Some(edge) = self.lineage.get(cursor) {
            if !seen.insert(edge.parent.clone()) {
                return Err(InheritanceError::LineageCycle {
                    parent: edge.parent.clone(),
                    child: edge.child.clone(),
                });
            }
            hops.push(LineageHop {
                version: edge.parent.clone(),
                negotiation_ref: edge.negotiation_ref.clone(),
            });
            cursor = &edge.parent;
        }
        Ok(hops)
    }

    /// One `parent -> child [negotiation_ref]` line per edge, root first.
    /// With a version, only the edges on its ancestor chain are listed.
    pub fn export_lineage(&self, version: Option<&VersionId>) -> Result<String, InheritanceError> {
        let edges: Vec<&LineageEdge> = match version {
            Some(v) => {
                self.get(v)?;
                let mut chain = Vec::new();
                let mut cursor = v;
                while let Some(edge) = self.lineage.get(cursor) {
                    if chain.len() > self.lineage.len() {
                        break;
                    }
                    chain.push(edge);
                    cursor = &edge.parent;
                }
                chain.reverse();
                chain
            }
            None => self.lineage.values().collect(),
        };
        let mut out = String::new();
        for edge in edges {
            let reference = edge.negotiation_ref.as_deref().unwrap_or("");
            let _ = writeln!(out, "{} -> {} [{}]", edge.parent, edge.child, reference);
        }
        Ok(out)
    }

    /// Catalog-scoped versions that are not tombstoned.
    pub fn catalog_versions(&self) -> impl Iterator<Item = &VersionId> {
        self.visibility
            .iter()
            .filter(|(v, scope)| **scope == Scope::Catalog && !self.catalog_tombstones.contains(*v))
            .map(|(v, _)| v)
    }

    pub fn add_record(&mut self, record: NegotiationRecord) {
        self.history.push(record);
    }

    /// Negotiation records along the version's lineage, redacted for
    /// `requester` unless it is the group that negotiated them.
    ///
    /// Included are records whose result is the version or one of its
    /// ancestors, plus unsuccessful negotiations based on any of them.
    pub fn query_history(&self, version: &VersionId, requester: &GroupId) -> Result<Vec<RecordView>, InheritanceError> {
        let mut chain: BTreeSet<VersionId> = self.lineage(version)?.into_iter().map(|h| h.version).collect();
        chain.insert(version.clone());
        Ok(self
            .history
            .iter()
            .filter(|r| match &r.session.result_version {
                Some(result) => chain.contains(result),
                None => chain.contains(&r.session.base_version),
            })
            .map(|r| r.view_for(requester))
            .collect())
    }
}
