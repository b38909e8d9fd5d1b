//! Detection-to-ground-truth matching, average precision, hierarchical mAP,
//! and confusion-matrix mining for expert-model subset selection.
//!
//! Matching is greedy in descending score within each `(image, label)` group:
//! a detection takes the unmatched ground truth with the highest IoU at or
//! above the threshold, otherwise it is a false positive. AP is the area
//! under the monotonized precision-recall curve (all-point interpolation).
//! Labels without ground truth carry no AP and are excluded from the mAP
//! mean, reported separately.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::boxes::{iou, Detection, GroundTruthBox};
use crate::labelspace::{ExpansionMode, HierarchyError, LabelHierarchy, LabelId};

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    /// IoU threshold outside (0, 1].
    InvalidIouThreshold(f64),
    /// Score threshold outside [0, 1].
    InvalidScoreThreshold(f64),
    UnknownLabel(LabelId),
    /// No label has a ground-truth instance, so mAP is undefined.
    NoGroundTruth,
    EmptyExpertSubset,
    ZeroTopN,
    Hierarchy(HierarchyError),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::InvalidIouThreshold(t) => write!(f, "iou threshold {t} outside (0, 1]"),
            EvalError::InvalidScoreThreshold(t) => {
                write!(f, "score threshold {t} outside [0, 1]")
            }
            EvalError::UnknownLabel(id) => write!(f, "unknown label {id}"),
            EvalError::NoGroundTruth => write!(f, "no label has ground truth"),
            EvalError::EmptyExpertSubset => write!(f, "expert subset is empty"),
            EvalError::ZeroTopN => write!(f, "top_n must be at least 1"),
            EvalError::Hierarchy(e) => write!(f, "{e}"),
        }
    }
}

impl From<HierarchyError> for EvalError {
    fn from(e: HierarchyError) -> Self {
        EvalError::Hierarchy(e)
    }
}

/// Per-label matching outcome: true/false-positive flags in score-descending
/// order plus the ground-truth count.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatches {
    pub flags: Vec<bool>,
    pub num_gt: usize,
}

/// Matching outcome for every label present in the detections or the ground
/// truth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    pub per_label: BTreeMap<LabelId, LabelMatches>,
}

/// Canonical processing order: descending score, ties by image id, box
/// coordinates, then input position. AP is therefore stable under any
/// order-preserving rescaling of the scores.
fn canonical_order(dets: &[&Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .total_cmp(&dets[a].score)
            .then_with(|| dets[a].image_id.cmp(&dets[b].image_id))
            .then_with(|| dets[a].bbox.bits_key().cmp(&dets[b].bbox.bits_key()))
            .then_with(|| a.cmp(&b))
    });
    order
}

/// Greedy matching per label. Inputs are expected to be label-expanded
/// already when hierarchical semantics are wanted; this function treats
/// labels independently.
pub fn match_detections(
    dets: &[Detection],
    gts: &[GroundTruthBox],
    iou_thr: f64,
) -> Result<MatchResult, EvalError> {
    if !iou_thr.is_finite() || iou_thr <= 0.0 || iou_thr > 1.0 {
        return Err(EvalError::InvalidIouThreshold(iou_thr));
    }
    let mut labels: BTreeSet<&LabelId> = BTreeSet::new();
    labels.extend(dets.iter().map(|d| &d.label));
    labels.extend(gts.iter().map(|g| &g.label));

    let mut result = MatchResult::default();
    for label in labels {
        let label_dets: Vec<&Detection> = dets.iter().filter(|d| &d.label == label).collect();
        let label_gts: Vec<&GroundTruthBox> = gts.iter().filter(|g| &g.label == label).collect();
        // image -> indices into label_gts
        let mut gts_by_image: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, gt) in label_gts.iter().enumerate() {
            gts_by_image
                .entry(gt.image_id.as_str())
                .or_default()
                .push(i);
        }
        let mut taken = alloc::vec![false; label_gts.len()];
        let mut flags = Vec::with_capacity(label_dets.len());
        for idx in canonical_order(&label_dets) {
            let det = label_dets[idx];
            let mut best: Option<(f64, usize)> = None;
            if let Some(candidates) = gts_by_image.get(det.image_id.as_str()) {
                for &gi in candidates {
                    if taken[gi] {
                        continue;
                    }
                    let overlap = iou(&det.bbox, &label_gts[gi].bbox);
                    if overlap < iou_thr {
                        continue;
                    }
                    // strict improvement keeps the first (lowest-index)
                    // ground truth on exact IoU ties
                    let better = match best {
                        None => true,
                        Some((b, _)) => overlap > b,
                    };
                    if better {
                        best = Some((overlap, gi));
                    }
                }
            }
            match best {
                Some((_, gi)) => {
                    taken[gi] = true;
                    flags.push(true);
                }
                None => flags.push(false),
            }
        }
        result.per_label.insert(
            (*label).clone(),
            LabelMatches {
                flags,
                num_gt: label_gts.len(),
            },
        );
    }
    Ok(result)
}

/// All-point interpolated area under the precision-recall curve. `None` when
/// there is no ground truth (AP undefined; the label is excluded from mAP).
pub fn average_precision(matches: &LabelMatches) -> Option<f64> {
    if matches.num_gt == 0 {
        return None;
    }
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(matches.flags.len()); // (recall, precision)
    let mut tp = 0usize;
    let mut fp = 0usize;
    for &flag in &matches.flags {
        if flag {
            tp += 1;
        } else {
            fp += 1;
        }
        points.push((
            tp as f64 / matches.num_gt as f64,
            tp as f64 / (tp + fp) as f64,
        ));
    }
    // monotone precision envelope from the right
    let mut best = 0.0f64;
    for point in points.iter_mut().rev() {
        best = best.max(point.1);
        point.1 = best;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (recall, precision) in points {
        if recall > prev_recall {
            ap += (recall - prev_recall) * precision;
            prev_recall = recall;
        }
    }
    Some(ap)
}

/// Per-label APs, ground-truth counts, and their mean over labels with at
/// least one ground-truth instance.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_label_ap: BTreeMap<LabelId, f64>,
    pub gt_counts: BTreeMap<LabelId, usize>,
    /// Labels that appear in detections but have no ground truth; excluded
    /// from the mean.
    pub labels_without_gt: BTreeSet<LabelId>,
    pub mean_ap: f64,
}

/// Flat (non-hierarchical) evaluation: per-label matching, AP, and the mean
/// over labels with ground truth.
pub fn evaluate_flat(
    dets: &[Detection],
    gts: &[GroundTruthBox],
    iou_thr: f64,
) -> Result<EvalReport, EvalError> {
    let matches = match_detections(dets, gts, iou_thr)?;
    let mut per_label_ap = BTreeMap::new();
    let mut gt_counts = BTreeMap::new();
    let mut labels_without_gt = BTreeSet::new();
    for (label, label_matches) in &matches.per_label {
        gt_counts.insert(label.clone(), label_matches.num_gt);
        match average_precision(label_matches) {
            Some(ap) => {
                per_label_ap.insert(label.clone(), ap);
            }
            None => {
                labels_without_gt.insert(label.clone());
            }
        }
    }
    if per_label_ap.is_empty() {
        return Err(EvalError::NoGroundTruth);
    }
    let mean_ap = per_label_ap.values().sum::<f64>() / per_label_ap.len() as f64;
    Ok(EvalReport {
        per_label_ap,
        gt_counts,
        labels_without_gt,
        mean_ap,
    })
}

/// Hierarchical mAP: expands ground truth to ancestors and detections to
/// ancestors (per the evaluation protocol), then evaluates per label.
/// Inputs are the raw, unexpanded files.
pub fn hierarchical_map(
    dets: &[Detection],
    gts: &[GroundTruthBox],
    hierarchy: &LabelHierarchy,
    iou_thr: f64,
) -> Result<EvalReport, EvalError> {
    let gts = hierarchy.expand_ground_truth(gts)?;
    let dets = hierarchy.expand_detections(dets, ExpansionMode::Ancestors)?;
    evaluate_flat(&dets, &gts, iou_thr)
}

/// Counts of (ground-truth label, predicted label) overlaps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfusionMatrix {
    counts: BTreeMap<(LabelId, LabelId), u64>,
}

impl ConfusionMatrix {
    pub fn get(&self, gt_label: &LabelId, det_label: &LabelId) -> u64 {
        self.counts
            .get(&(gt_label.clone(), det_label.clone()))
            .copied()
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(LabelId, LabelId), &u64)> {
        self.counts.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Builds the confusion matrix: every detection at or above `score_thr` is
/// assigned to its single best-overlapping ground truth (IoU at least
/// `iou_thr`, any label, same image); the cell `(gt label, detection label)`
/// is incremented. Same-label assignments land on the diagonal.
pub fn confusion_matrix(
    dets: &[Detection],
    gts: &[GroundTruthBox],
    hierarchy: &LabelHierarchy,
    iou_thr: f64,
    score_thr: f64,
) -> Result<ConfusionMatrix, EvalError> {
    if !iou_thr.is_finite() || iou_thr <= 0.0 || iou_thr > 1.0 {
        return Err(EvalError::InvalidIouThreshold(iou_thr));
    }
    if !score_thr.is_finite() || !(0.0..=1.0).contains(&score_thr) {
        return Err(EvalError::InvalidScoreThreshold(score_thr));
    }
    for det in dets {
        if !hierarchy.contains(&det.label) {
            return Err(EvalError::UnknownLabel(det.label.clone()));
        }
    }
    for gt in gts {
        if !hierarchy.contains(&gt.label) {
            return Err(EvalError::UnknownLabel(gt.label.clone()));
        }
    }
    let mut gts_by_image: BTreeMap<&str, Vec<&GroundTruthBox>> = BTreeMap::new();
    for gt in gts {
        gts_by_image
            .entry(gt.image_id.as_str())
            .or_default()
            .push(gt);
    }
    let mut matrix = ConfusionMatrix::default();
    for det in dets {
        if det.score < score_thr {
            continue;
        }
        let Some(candidates) = gts_by_image.get(det.image_id.as_str()) else {
            continue;
        };
        let mut best: Option<(f64, &GroundTruthBox)> = None;
        for gt in candidates {
            let overlap = iou(&det.bbox, &gt.bbox);
            if overlap < iou_thr {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, _)) => overlap > b,
            };
            if better {
                best = Some((overlap, gt));
            }
        }
        if let Some((_, gt)) = best {
            *matrix
                .counts
                .entry((gt.label.clone(), det.label.clone()))
                .or_insert(0) += 1;
        }
    }
    Ok(matrix)
}

/// Labels outside `expert_subset` ranked by how much off-diagonal mass flows
/// from them into subset labels; the natural additions to an expert model's
/// next training round. Zero-mass labels are omitted; ties break by id.
pub fn confusable_categories(
    matrix: &ConfusionMatrix,
    expert_subset: &BTreeSet<LabelId>,
    top_n: usize,
) -> Result<Vec<LabelId>, EvalError> {
    if expert_subset.is_empty() {
        return Err(EvalError::EmptyExpertSubset);
    }
    if top_n == 0 {
        return Err(EvalError::ZeroTopN);
    }
    let mut mass: BTreeMap<&LabelId, u64> = BTreeMap::new();
    for ((gt_label, det_label), count) in matrix.iter() {
        if gt_label != det_label
            && !expert_subset.contains(gt_label)
            && expert_subset.contains(det_label)
        {
            *mass.entry(gt_label).or_insert(0) += count;
        }
    }
    let mut ranked: Vec<(&LabelId, u64)> = mass.into_iter().filter(|(_, m)| *m > 0).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(ranked
        .into_iter()
        .take(top_n)
        .map(|(id, _)| id.clone())
        .collect())
}
