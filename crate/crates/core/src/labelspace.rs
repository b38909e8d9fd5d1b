//! Hierarchical tag system: label identifiers, the parent DAG, ambiguity
//! groups, and the ancestor/ambiguity expansion the evaluation protocol
//! requires.
//!
//! The hierarchy is a DAG (a child may have several parents); expansion
//! deduplicates per `(image, label, box)` so diamond-shaped parentage never
//! double-counts. Ambiguity groups hold labels with no hierarchical relation
//! that annotators use interchangeably (torch vs. flashlight); expanding to
//! partners is opt-in via [`ExpansionMode`].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::boxes::{Detection, GroundTruthBox};

/// Opaque label identifier, e.g. `/m/01g317`. Non-empty by construction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelId(String);

impl LabelId {
    pub fn new(id: impl Into<String>) -> Result<Self, HierarchyError> {
        let id = id.into();
        if id.is_empty() {
            return Err(HierarchyError::EmptyLabelId);
        }
        Ok(LabelId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One hierarchy node: identifier plus human-readable display name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelNode {
    pub id: LabelId,
    pub name: String,
}

/// How detections are expanded: to ancestors only (the evaluation protocol's
/// mandate) or additionally to ambiguity partners.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionMode {
    Ancestors,
    AncestorsAndAmbiguity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HierarchyError {
    EmptyLabelId,
    DuplicateId(LabelId),
    /// An edge endpoint is not a declared node.
    DanglingEdge {
        child: LabelId,
        parent: LabelId,
        missing: LabelId,
    },
    SelfEdge(LabelId),
    /// The parent relation contains a cycle through this label.
    CycleDetected(LabelId),
    UnknownLabel(LabelId),
    AmbiguityUnknownLabel(LabelId),
    /// Fewer than two distinct members in an ambiguity group.
    AmbiguityGroupTooSmall(LabelId),
    /// Two group members are also ancestor/descendant of each other.
    AmbiguityOverlapsHierarchy {
        a: LabelId,
        b: LabelId,
    },
}

impl fmt::Display for HierarchyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HierarchyError::EmptyLabelId => write!(f, "empty label id"),
            HierarchyError::DuplicateId(id) => write!(f, "duplicate label id {id}"),
            HierarchyError::DanglingEdge {
                child,
                parent,
                missing,
            } => {
                write!(
                    f,
                    "edge {child} -> {parent} references unknown id {missing}"
                )
            }
            HierarchyError::SelfEdge(id) => write!(f, "self edge on {id}"),
            HierarchyError::CycleDetected(id) => {
                write!(f, "parent relation has a cycle through {id}")
            }
            HierarchyError::UnknownLabel(id) => write!(f, "unknown label {id}"),
            HierarchyError::AmbiguityUnknownLabel(id) => {
                write!(f, "ambiguity group references unknown id {id}")
            }
            HierarchyError::AmbiguityGroupTooSmall(id) => {
                write!(
                    f,
                    "ambiguity group containing {id} has fewer than two members"
                )
            }
            HierarchyError::AmbiguityOverlapsHierarchy { a, b } => {
                write!(
                    f,
                    "ambiguity pair {a} / {b} is also related through the hierarchy"
                )
            }
        }
    }
}

/// Immutable DAG of labels with ambiguity groups. Safe to share across
/// threads once built.
#[derive(Debug, Clone)]
pub struct LabelHierarchy {
    /// id -> display name
    nodes: BTreeMap<LabelId, String>,
    /// child -> parents, sorted and deduplicated
    parents: BTreeMap<LabelId, Vec<LabelId>>,
    groups: Vec<BTreeSet<LabelId>>,
}

impl LabelHierarchy {
    /// Validates every structural invariant: unique ids, edge endpoints exist,
    /// no self edges, acyclic parent relation, ambiguity groups of at least
    /// two known members never related through the hierarchy.
    pub fn new(
        nodes: Vec<LabelNode>,
        edges: Vec<(LabelId, LabelId)>,
        groups: Vec<Vec<LabelId>>,
    ) -> Result<Self, HierarchyError> {
        let mut node_map: BTreeMap<LabelId, String> = BTreeMap::new();
        for node in nodes {
            if node_map.insert(node.id.clone(), node.name).is_some() {
                return Err(HierarchyError::DuplicateId(node.id));
            }
        }

        let mut parents: BTreeMap<LabelId, Vec<LabelId>> = BTreeMap::new();
        for (child, parent) in edges {
            if !node_map.contains_key(&child) {
                return Err(HierarchyError::DanglingEdge {
                    missing: child.clone(),
                    child,
                    parent,
                });
            }
            if !node_map.contains_key(&parent) {
                return Err(HierarchyError::DanglingEdge {
                    missing: parent.clone(),
                    child,
                    parent,
                });
            }
            if child == parent {
                return Err(HierarchyError::SelfEdge(child));
            }
            let list = parents.entry(child).or_default();
            if !list.contains(&parent) {
                list.push(parent);
            }
        }
        for list in parents.values_mut() {
            list.sort();
        }

        let mut groups_set: Vec<BTreeSet<LabelId>> = Vec::new();
        for group in groups {
            let mut set = BTreeSet::new();
            for id in group {
                if !node_map.contains_key(&id) {
                    return Err(HierarchyError::AmbiguityUnknownLabel(id));
                }
                set.insert(id);
            }
            if set.len() < 2 {
                let witness = set.into_iter().next().ok_or(HierarchyError::EmptyLabelId)?;
                return Err(HierarchyError::AmbiguityGroupTooSmall(witness));
            }
            groups_set.push(set);
        }

        let hierarchy = LabelHierarchy {
            nodes: node_map,
            parents,
            groups: groups_set,
        };
        hierarchy.check_acyclic()?;
        hierarchy.check_groups_disjoint_from_hierarchy()?;
        Ok(hierarchy)
    }

    fn check_acyclic(&self) -> Result<(), HierarchyError> {
        // Kahn's algorithm over child -> parent edges; leftovers are on a cycle.
        let mut out_degree: BTreeMap<&LabelId, usize> = BTreeMap::new();
        let mut children: BTreeMap<&LabelId, Vec<&LabelId>> = BTreeMap::new();
        for id in self.nodes.keys() {
            out_degree.insert(id, 0);
        }
        for (child, parents) in &self.parents {
            *out_degree
                .get_mut(child)
                .ok_or(HierarchyError::EmptyLabelId)? = parents.len();
            for parent in parents {
                children.entry(parent).or_default().push(child);
            }
        }
        let mut ready: Vec<&LabelId> = out_degree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(id, _)| *id)
            .collect();
        let mut seen = 0usize;
        while let Some(id) = ready.pop() {
            seen += 1;
            if let Some(kids) = children.get(id) {
                for kid in kids {
                    let d = out_degree
                        .get_mut(kid)
                        .ok_or(HierarchyError::EmptyLabelId)?;
                    *d -= 1;
                    if *d == 0 {
                        ready.push(kid);
                    }
                }
            }
        }
        if seen != self.nodes.len() {
            let witness = out_degree
                .iter()
                .filter(|(_, d)| **d > 0)
                .map(|(id, _)| (*id).clone())
                .next()
                .ok_or(HierarchyError::EmptyLabelId)?;
            return Err(HierarchyError::CycleDetected(witness));
        }
        Ok(())
    }

    fn check_groups_disjoint_from_hierarchy(&self) -> Result<(), HierarchyError> {
        for group in &self.groups {
            for a in group {
                let ancestors_of_a = self.ancestors(a)?;
                for b in group {
                    if a != b && ancestors_of_a.contains(b) {
                        return Err(HierarchyError::AmbiguityOverlapsHierarchy {
                            a: a.clone(),
                            b: b.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, label: &LabelId) -> bool {
        self.nodes.contains_key(label)
    }

    pub fn display_name(&self, label: &LabelId) -> Option<&str> {
        self.nodes.get(label).map(String::as_str)
    }

    pub fn labels(&self) -> impl Iterator<Item = &LabelId> {
        self.nodes.keys()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Direct parents of `label`, sorted by id. Empty for roots.
    pub fn parents(&self, label: &LabelId) -> &[LabelId] {
        self.parents.get(label).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Strict ancestors of `label`: the transitive closure of the parent
    /// relation, deduplicated, nearest level first (ties by id). Never
    /// contains `label` itself.
    pub fn ancestors(&self, label: &LabelId) -> Result<Vec<LabelId>, HierarchyError> {
        if !self.contains(label) {
            return Err(HierarchyError::UnknownLabel(label.clone()));
        }
        // Longest distance from the query orders parents before grandparents;
        // ties cannot be ancestor-related, so (distance, id) is topological.
        let mut dist: BTreeMap<&LabelId, usize> = BTreeMap::new();
        dist.insert(label, 0);
        let mut changed = true;
        while changed {
            changed = false;
            let snapshot: Vec<(&LabelId, usize)> = dist.iter().map(|(id, d)| (*id, *d)).collect();
            for (id, d) in snapshot {
                for parent in self.parents(id) {
                    let candidate = d + 1;
                    let entry = dist.entry(parent).or_insert(0);
                    if *entry < candidate {
                        *entry = candidate;
                        changed = true;
                    }
                }
            }
        }
        let mut closure: Vec<(usize, LabelId)> = dist
            .into_iter()
            .filter(|(id, _)| *id != label)
            .map(|(id, d)| (d, id.clone()))
            .collect();
        closure.sort();
        Ok(closure.into_iter().map(|(_, id)| id).collect())
    }

    /// Ambiguity partners of `label`: union of every group containing it,
    /// excluding the label itself, sorted by id.
    pub fn ambiguity_partners(&self, label: &LabelId) -> Result<Vec<LabelId>, HierarchyError> {
        if !self.contains(label) {
            return Err(HierarchyError::UnknownLabel(label.clone()));
        }
        let mut partners = BTreeSet::new();
        for group in &self.groups {
            if group.contains(label) {
                partners.extend(group.iter().filter(|id| *id != label).cloned());
            }
        }
        Ok(partners.into_iter().collect())
    }

    /// Copies every ground-truth box to each strict ancestor of its label.
    /// Output is deduplicated per `(image, label, box)`, so the expansion is
    /// idempotent. Geometry and original ordering are preserved.
    pub fn expand_ground_truth(
        &self,
        gts: &[GroundTruthBox],
    ) -> Result<Vec<GroundTruthBox>, HierarchyError> {
        let mut seen: BTreeSet<(String, LabelId, [u64; 4])> = BTreeSet::new();
        let mut out = Vec::new();
        for gt in gts {
            let ancestors = self.ancestors(&gt.label)?;
            let mut emit = |label: &LabelId| {
                let key = (gt.image_id.clone(), label.clone(), gt.bbox.bits_key());
                if seen.insert(key) {
                    out.push(GroundTruthBox {
                        image_id: gt.image_id.clone(),
                        label: label.clone(),
                        bbox: gt.bbox,
                    });
                }
            };
            emit(&gt.label);
            for ancestor in &ancestors {
                emit(ancestor);
            }
        }
        Ok(out)
    }

    /// Duplicates every detection to its strict ancestors (and, in
    /// [`ExpansionMode::AncestorsAndAmbiguity`], to its ambiguity partners)
    /// with identical box and score. Deduplicated per `(image, label, box)`;
    /// the first occurrence wins when the same triple appears with different
    /// scores.
    pub fn expand_detections(
        &self,
        dets: &[Detection],
        mode: ExpansionMode,
    ) -> Result<Vec<Detection>, HierarchyError> {
        let mut seen: BTreeSet<(String, LabelId, [u64; 4])> = BTreeSet::new();
        let mut out = Vec::new();
        for det in dets {
            let mut targets = self.ancestors(&det.label)?;
            if mode == ExpansionMode::AncestorsAndAmbiguity {
                targets.extend(self.ambiguity_partners(&det.label)?);
            }
            let mut emit = |label: &LabelId| {
                let key = (det.image_id.clone(), label.clone(), det.bbox.bits_key());
                if seen.insert(key) {
                    out.push(Detection {
                        image_id: det.image_id.clone(),
                        label: label.clone(),
                        score: det.score,
                        bbox: det.bbox,
                    });
                }
            };
            emit(&det.label);
            for label in &targets {
                emit(label);
            }
        }
        Ok(out)
    }
}
