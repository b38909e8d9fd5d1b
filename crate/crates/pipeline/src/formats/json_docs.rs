//! JSON document formats: label hierarchy, augmentation policy, ensemble
//! manifest, scale-search grid spec, and architecture plans.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use detkit_core::augment::{AugOp, AugOpKind, Policy};
use detkit_core::labelspace::{LabelHierarchy, LabelId, LabelNode};
use detkit_core::scaling::{ArchPlan, ArchStage, SearchGrid};

use super::atomic::write_atomic;
use crate::error::PipelineError;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::data(format!("{}: {e}", path.display())))
}

#[derive(Debug, Deserialize)]
struct HierarchyDoc {
    nodes: Vec<NodeDoc>,
    #[serde(default)]
    edges: Vec<EdgeDoc>,
    #[serde(default)]
    ambiguity_groups: Vec<Vec<String>>,
}

#[derive(Debug, Deserialize)]
struct NodeDoc {
    id: String,
    name: String,
}

#[derive(Debug, Deserialize)]
struct EdgeDoc {
    child: String,
    parent: String,
}

/// Loads and validates a hierarchy document:
/// `{"nodes":[{"id","name"}],"edges":[{"child","parent"}],"ambiguity_groups":[["a","b"]]}`.
pub fn load_hierarchy(path: &Path) -> Result<LabelHierarchy, PipelineError> {
    let doc: HierarchyDoc = read_json(path)?;
    let context = path.display().to_string();
    let label =
        |raw: &str| LabelId::new(raw).map_err(|e| PipelineError::data(format!("{context}: {e}")));
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for node in &doc.nodes {
        nodes.push(LabelNode {
            id: label(&node.id)?,
            name: node.name.clone(),
        });
    }
    let mut edges = Vec::with_capacity(doc.edges.len());
    for edge in &doc.edges {
        edges.push((label(&edge.child)?, label(&edge.parent)?));
    }
    let mut groups = Vec::with_capacity(doc.ambiguity_groups.len());
    for group in &doc.ambiguity_groups {
        let mut ids = Vec::with_capacity(group.len());
        for raw in group {
            ids.push(label(raw)?);
        }
        groups.push(ids);
    }
    LabelHierarchy::new(nodes, edges, groups)
        .map_err(|e| PipelineError::data(format!("{context}: {e}")))
}

#[derive(Debug, Serialize, Deserialize)]
struct SubPolicyDoc {
    ops: Vec<OpDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OpDoc {
    kind: String,
    p: f64,
    m: u8,
}

/// Loads a policy document: a JSON array of sub-policies, each
/// `{"ops":[{"kind","p","m"},{"kind","p","m"}]}`.
pub fn load_policy(path: &Path) -> Result<Policy, PipelineError> {
    let docs: Vec<SubPolicyDoc> = read_json(path)?;
    let context = path.display().to_string();
    let mut sub_policies = Vec::with_capacity(docs.len());
    for (i, sub) in docs.iter().enumerate() {
        if sub.ops.len() != 2 {
            return Err(PipelineError::data(format!(
                "{context}: sub-policy {i} must have exactly 2 ops, has {}",
                sub.ops.len()
            )));
        }
        let mut ops = Vec::with_capacity(2);
        for op in &sub.ops {
            let kind: AugOpKind = op
                .kind
                .parse()
                .map_err(|e| PipelineError::data(format!("{context}: sub-policy {i}: {e}")))?;
            ops.push(
                AugOp::new(kind, op.p, op.m)
                    .map_err(|e| PipelineError::data(format!("{context}: sub-policy {i}: {e}")))?,
            );
        }
        sub_policies.push([ops[0], ops[1]]);
    }
    Policy::new(sub_policies).map_err(|e| PipelineError::data(format!("{context}: {e}")))
}

pub fn policy_to_json(policy: &Policy) -> String {
    let docs: Vec<SubPolicyDoc> = policy
        .sub_policies()
        .iter()
        .map(|[a, b]| SubPolicyDoc {
            ops: vec![
                OpDoc {
                    kind: a.kind.as_str().into(),
                    p: a.probability,
                    m: a.magnitude,
                },
                OpDoc {
                    kind: b.kind.as_str().into(),
                    p: b.probability,
                    m: b.magnitude,
                },
            ],
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&docs).expect("policy serialization");
    text.push('\n');
    text
}

#[derive(Debug, Deserialize)]
pub struct ManifestDoc {
    pub models: Vec<ManifestModel>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

#[derive(Debug, Deserialize)]
pub struct ManifestModel {
    pub id: String,
    pub detections_csv: String,
    pub ap_csv: String,
}

fn default_alpha() -> f64 {
    0.1
}

/// Loads an ensemble manifest:
/// `{"models":[{"id","detections_csv","ap_csv"}],"alpha":0.1}`. Relative
/// paths resolve against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<(ManifestDoc, PathBuf), PipelineError> {
    let doc: ManifestDoc = read_json(path)?;
    if doc.models.is_empty() {
        return Err(PipelineError::data(format!(
            "{}: manifest lists no models",
            path.display()
        )));
    }
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    Ok((doc, base))
}

pub fn resolve_manifest_path(base: &Path, raw: &str) -> PathBuf {
    let p = Path::new(raw);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[derive(Debug, Deserialize)]
pub struct GridSpecDoc {
    pub depth: Vec<f64>,
    pub width: Vec<f64>,
    pub resolution: Vec<f64>,
    #[serde(default = "default_target")]
    pub target: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_target() -> f64 {
    2.0
}

fn default_tol() -> f64 {
    0.05
}

/// Loads the scale-search grid spec:
/// `{"depth":[...],"width":[...],"resolution":[...],"target":2.0,"tol":0.05}`.
pub fn load_grid_spec(path: &Path) -> Result<(SearchGrid, f64, f64), PipelineError> {
    let doc: GridSpecDoc = read_json(path)?;
    let grid = SearchGrid {
        depth: doc.depth,
        width: doc.width,
        resolution: doc.resolution,
    };
    Ok((grid, doc.target, doc.tol))
}

#[derive(Debug, Serialize, Deserialize)]
struct ArchPlanDoc {
    stages: Vec<ArchStageDoc>,
    resolution: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArchStageDoc {
    blocks: u32,
    width_mult: f64,
}

/// Loads an architecture plan:
/// `{"stages":[{"blocks":2,"width_mult":1.0},...],"resolution":1.0}`.
pub fn load_arch_plan(path: &Path) -> Result<ArchPlan, PipelineError> {
    let doc: ArchPlanDoc = read_json(path)?;
    let stages = doc
        .stages
        .into_iter()
        .map(|s| ArchStage {
            blocks: s.blocks,
            width_mult: s.width_mult,
        })
        .collect();
    ArchPlan::new(stages, doc.resolution)
        .map_err(|e| PipelineError::data(format!("{}: {e}", path.display())))
}

pub fn write_arch_plan(plan: &ArchPlan, path: &Path) -> Result<(), PipelineError> {
    let doc = ArchPlanDoc {
        stages: plan
            .stages
            .iter()
            .map(|s| ArchStageDoc {
                blocks: s.blocks,
                width_mult: s.width_mult,
            })
            .collect(),
        resolution: plan.resolution,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("plan serialization");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
