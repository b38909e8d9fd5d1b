//! Multi-model ensembling: per-category model re-weighting from validation
//! AP tables, classifier score re-weighting, expert-model consensus
//! filtering, weighted fusion with per-category NMS, and per-category NMS
//! threshold search.
//!
//! The weight for model `m` on category `c` interpolates between a lower
//! bound `alpha` (at the across-model mean AP) and 1 (at the across-model
//! maximum), clamping to `alpha` below the mean:
//! `w = (s - mu)/(t - mu) + alpha * (t - s)/(t - mu)`.
//!
//! Threshold search scans a grid per category and scores each candidate by
//! post-NMS AP. The default `penalty` objective is `AP(h) - lambda*(h - d)^2`,
//! which keeps thresholds near the default `d` unless AP genuinely improves;
//! the `paper` objective `AP(h) + 1/(h - d)^2` is kept as an option and
//! requires `d` itself to be excluded from the grid.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::boxes::{nms, BoxError, Detection, GroundTruthBox};
use crate::evaluation::{average_precision, match_detections, EvalError};
use crate::labelspace::{ExpansionMode, HierarchyError, LabelHierarchy, LabelId};

#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleError {
    InvalidAlpha(f64),
    /// Category-weight bounds violated: mean exceeds max.
    InvalidBounds {
        mu: f64,
        t: f64,
    },
    EmptyRuns,
    InvalidApValue {
        model: String,
        label: LabelId,
        value: f64,
    },
    MissingWeight {
        model: String,
        label: LabelId,
    },
    ClassifierScoreOutOfRange(f64),
    /// A run emitted a detection outside its declared expert subset.
    DetectionOutsideSubset {
        model: String,
        label: LabelId,
    },
    MissingSubset(String),
    InvalidThreshold(f64),
    EmptyGrid,
    InvalidGridValue(f64),
    /// Paper-mode objective divides by (h - d)^2; d must not be on the grid.
    GridContainsDefault(f64),
    InvalidLambda(f64),
    /// Threshold search needs at least one ground-truth instance.
    EmptyGroundTruth,
    Box(BoxError),
    Eval(EvalError),
    Hierarchy(HierarchyError),
}

impl fmt::Display for EnsembleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnsembleError::InvalidAlpha(a) => write!(f, "alpha {a} outside [0, 1]"),
            EnsembleError::InvalidBounds { mu, t } => {
                write!(f, "mean {mu} exceeds max {t}")
            }
            EnsembleError::EmptyRuns => write!(f, "no model runs supplied"),
            EnsembleError::InvalidApValue {
                model,
                label,
                value,
            } => {
                write!(f, "model {model} has AP {value} outside [0, 1] for {label}")
            }
            EnsembleError::MissingWeight { model, label } => {
                write!(f, "no weight for model {model}, label {label}")
            }
            EnsembleError::ClassifierScoreOutOfRange(s) => {
                write!(f, "classifier score {s} outside [0, 1]")
            }
            EnsembleError::DetectionOutsideSubset { model, label } => {
                write!(
                    f,
                    "model {model} emitted {label} outside its declared subset"
                )
            }
            EnsembleError::MissingSubset(model) => {
                write!(f, "no declared subset for model {model}")
            }
            EnsembleError::InvalidThreshold(t) => write!(f, "threshold {t} outside (0, 1)"),
            EnsembleError::EmptyGrid => write!(f, "threshold grid is empty"),
            EnsembleError::InvalidGridValue(v) => {
                write!(f, "grid value {v} outside (0, 1)")
            }
            EnsembleError::GridContainsDefault(d) => {
                write!(f, "paper-mode grid must exclude the default threshold {d}")
            }
            EnsembleError::InvalidLambda(l) => write!(f, "lambda {l} must be non-negative"),
            EnsembleError::EmptyGroundTruth => {
                write!(f, "threshold search needs ground truth")
            }
            EnsembleError::Box(e) => write!(f, "{e}"),
            EnsembleError::Eval(e) => write!(f, "{e}"),
            EnsembleError::Hierarchy(e) => write!(f, "{e}"),
        }
    }
}

impl From<BoxError> for EnsembleError {
    fn from(e: BoxError) -> Self {
        EnsembleError::Box(e)
    }
}

impl From<EvalError> for EnsembleError {
    fn from(e: EvalError) -> Self {
        EnsembleError::Eval(e)
    }
}

impl From<HierarchyError> for EnsembleError {
    fn from(e: HierarchyError) -> Self {
        EnsembleError::Hierarchy(e)
    }
}

/// One model's detections plus its per-category validation AP table.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRun {
    pub model_id: String,
    pub detections: Vec<Detection>,
    pub per_category_ap: BTreeMap<LabelId, f64>,
}

/// Per-(model, category) multiplier table.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    pub alpha: f64,
    weights: BTreeMap<(String, LabelId), f64>,
}

impl WeightTable {
    pub fn get(&self, model: &str, label: &LabelId) -> Option<f64> {
        self.weights
            .get(&(String::from(model), label.clone()))
            .copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, LabelId), &f64)> {
        self.weights.iter()
    }
}

/// Interpolated category weight: 1 at `s = t`, `alpha` at `s = mu`, clamped
/// to `alpha` below the mean. When every model ties (`t = mu`) the weight
/// is 1.
pub fn category_weight(s: f64, mu: f64, t: f64, alpha: f64) -> Result<f64, EnsembleError> {
    if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
        return Err(EnsembleError::InvalidAlpha(alpha));
    }
    if mu > t {
        return Err(EnsembleError::InvalidBounds { mu, t });
    }
    if t == mu {
        return Ok(1.0);
    }
    // inclusive so s = mu lands on alpha exactly, free of rounding
    if s <= mu {
        return Ok(alpha);
    }
    Ok((s - mu) / (t - mu) + alpha * (t - s) / (t - mu))
}

/// Builds the weight table over the union of categories reported by any run.
/// A model with no AP entry for a category contributes s = 0 (it never finds
/// that category), so every (model, category) pair gets a weight.
pub fn weight_table(runs: &[ModelRun], alpha: f64) -> Result<WeightTable, EnsembleError> {
    if runs.is_empty() {
        return Err(EnsembleError::EmptyRuns);
    }
    if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
        return Err(EnsembleError::InvalidAlpha(alpha));
    }
    let mut labels: BTreeSet<&LabelId> = BTreeSet::new();
    for run in runs {
        for (label, &value) in &run.per_category_ap {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(EnsembleError::InvalidApValue {
                    model: run.model_id.clone(),
                    label: label.clone(),
                    value,
                });
            }
            labels.insert(label);
        }
    }
    let mut weights = BTreeMap::new();
    for label in labels {
        let scores: Vec<f64> = runs
            .iter()
            .map(|run| run.per_category_ap.get(label).copied().unwrap_or(0.0))
            .collect();
        let mu = scores.iter().sum::<f64>() / scores.len() as f64;
        let t = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (run, &s) in runs.iter().zip(&scores) {
            let w = category_weight(s, mu, t, alpha)?;
            weights.insert((run.model_id.clone(), label.clone()), w);
        }
    }
    Ok(WeightTable { alpha, weights })
}

/// Multiplies each detection score by its (model, category) weight, clamped
/// to [0, 1]. Within one (model, category) the score ordering is preserved.
pub fn reweight_detections(
    run: &ModelRun,
    table: &WeightTable,
) -> Result<Vec<Detection>, EnsembleError> {
    run.detections
        .iter()
        .map(|det| {
            let w = table.get(&run.model_id, &det.label).ok_or_else(|| {
                EnsembleError::MissingWeight {
                    model: run.model_id.clone(),
                    label: det.label.clone(),
                }
            })?;
            let mut out = det.clone();
            out.score = (det.score * w).clamp(0.0, 1.0);
            Ok(out)
        })
        .collect()
}

/// Join key for classifier scores: image, label, and the box rounded to six
/// decimals (the file serialization precision).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClassifierKey {
    pub image_id: String,
    pub label: LabelId,
    pub box_key: [i64; 4],
}

impl ClassifierKey {
    pub fn for_detection(det: &Detection) -> Self {
        ClassifierKey {
            image_id: det.image_id.clone(),
            label: det.label.clone(),
            box_key: det.bbox.rounded_key(),
        }
    }
}

/// What to do with detections that have no classifier score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingScore {
    Passthrough,
    Drop,
}

/// Multiplies detector scores by classifier scores where an entry exists.
pub fn classifier_reweight(
    dets: &[Detection],
    scores: &BTreeMap<ClassifierKey, f64>,
    missing: MissingScore,
) -> Result<Vec<Detection>, EnsembleError> {
    for &value in scores.values() {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(EnsembleError::ClassifierScoreOutOfRange(value));
        }
    }
    let mut out = Vec::with_capacity(dets.len());
    for det in dets {
        match scores.get(&ClassifierKey::for_detection(det)) {
            Some(&value) => {
                let mut reweighted = det.clone();
                reweighted.score = (det.score * value).clamp(0.0, 1.0);
                out.push(reweighted);
            }
            None => {
                if missing == MissingScore::Passthrough {
                    out.push(det.clone());
                }
            }
        }
    }
    Ok(out)
}

/// Canonical output order shared by consensus and fusion results:
/// image, label, descending score, box coordinates.
fn sort_canonical(dets: &mut [Detection]) {
    dets.sort_by(|a, b| {
        a.image_id
            .cmp(&b.image_id)
            .then_with(|| a.label.cmp(&b.label))
            .then_with(|| b.score.total_cmp(&a.score))
            .then_with(|| a.bbox.bits_key().cmp(&b.bbox.bits_key()))
    });
}

/// Consensus filter over expert models: a detection survives iff its label
/// lies in at least two declared subsets (the overlap region). Every run's
/// detections must already be restricted to its declared subset.
pub fn expert_consensus(
    expert_runs: &[ModelRun],
    subsets: &BTreeMap<String, BTreeSet<LabelId>>,
) -> Result<Vec<Detection>, EnsembleError> {
    for run in expert_runs {
        let subset = subsets
            .get(&run.model_id)
            .ok_or_else(|| EnsembleError::MissingSubset(run.model_id.clone()))?;
        for det in &run.detections {
            if !subset.contains(&det.label) {
                return Err(EnsembleError::DetectionOutsideSubset {
                    model: run.model_id.clone(),
                    label: det.label.clone(),
                });
            }
        }
    }
    let mut membership: BTreeMap<&LabelId, usize> = BTreeMap::new();
    for subset in subsets.values() {
        for label in subset {
            *membership.entry(label).or_insert(0) += 1;
        }
    }
    let mut survivors: Vec<Detection> = expert_runs
        .iter()
        .flat_map(|run| run.detections.iter())
        .filter(|det| membership.get(&det.label).copied().unwrap_or(0) >= 2)
        .cloned()
        .collect();
    sort_canonical(&mut survivors);
    Ok(survivors)
}

/// Per-category NMS thresholds with a default for categories without an
/// entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    default: f64,
    per_label: BTreeMap<LabelId, f64>,
}

impl ThresholdTable {
    pub fn new(default: f64) -> Result<Self, EnsembleError> {
        if !default.is_finite() || default <= 0.0 || default >= 1.0 {
            return Err(EnsembleError::InvalidThreshold(default));
        }
        Ok(ThresholdTable {
            default,
            per_label: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, label: LabelId, threshold: f64) -> Result<(), EnsembleError> {
        if !threshold.is_finite() || threshold <= 0.0 || threshold >= 1.0 {
            return Err(EnsembleError::InvalidThreshold(threshold));
        }
        self.per_label.insert(label, threshold);
        Ok(())
    }

    pub fn default_threshold(&self) -> f64 {
        self.default
    }

    pub fn get(&self, label: &LabelId) -> f64 {
        self.per_label.get(label).copied().unwrap_or(self.default)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LabelId, &f64)> {
        self.per_label.iter()
    }
}

/// Fuses the runs: re-weight every model's detections, pool them, then run
/// per-(image, label) NMS at that label's threshold. Output in canonical
/// order (image, label, descending score).
pub fn fuse(
    runs: &[ModelRun],
    weights: &WeightTable,
    thresholds: &ThresholdTable,
) -> Result<Vec<Detection>, EnsembleError> {
    if runs.is_empty() {
        return Err(EnsembleError::EmptyRuns);
    }
    let mut pooled: Vec<Detection> = Vec::new();
    for run in runs {
        pooled.extend(reweight_detections(run, weights)?);
    }
    let mut groups: BTreeMap<(String, LabelId), Vec<Detection>> = BTreeMap::new();
    for det in pooled {
        groups
            .entry((det.image_id.clone(), det.label.clone()))
            .or_default()
            .push(det);
    }
    let mut fused = Vec::new();
    for ((_, label), group) in groups {
        fused.extend(nms(&group, thresholds.get(&label))?);
    }
    sort_canonical(&mut fused);
    Ok(fused)
}

/// Objective used by the per-category threshold search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// `AP(h) + 1/(h - d)^2`, the literal objective; diverges toward `d`, so
    /// `d` must not be a grid point.
    Paper,
    /// `AP(h) - lambda * (h - d)^2`.
    Penalty,
}

fn validate_search_params(
    grid: &[f64],
    d: f64,
    mode: SearchMode,
    lambda: f64,
) -> Result<(), EnsembleError> {
    if grid.is_empty() {
        return Err(EnsembleError::EmptyGrid);
    }
    for &h in grid {
        if !h.is_finite() || h <= 0.0 || h >= 1.0 {
            return Err(EnsembleError::InvalidGridValue(h));
        }
    }
    if !d.is_finite() || d <= 0.0 || d >= 1.0 {
        return Err(EnsembleError::InvalidThreshold(d));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(EnsembleError::InvalidLambda(lambda));
    }
    if mode == SearchMode::Paper && grid.contains(&d) {
        return Err(EnsembleError::GridContainsDefault(d));
    }
    Ok(())
}

/// Picks the best threshold from a precomputed `(threshold, AP)` profile.
/// Ties break toward the threshold nearest `d`, then the smaller threshold.
pub fn best_threshold(
    profile: &[(f64, f64)],
    d: f64,
    mode: SearchMode,
    lambda: f64,
) -> Result<f64, EnsembleError> {
    let grid: Vec<f64> = profile.iter().map(|&(h, _)| h).collect();
    validate_search_params(&grid, d, mode, lambda)?;
    let objective = |h: f64, ap: f64| match mode {
        SearchMode::Paper => ap + 1.0 / ((h - d) * (h - d)),
        SearchMode::Penalty => ap - lambda * (h - d) * (h - d),
    };
    let mut best: Option<(f64, f64)> = None; // (objective, h)
    for &(h, ap) in profile {
        let value = objective(h, ap);
        let better = match best {
            None => true,
            Some((best_value, best_h)) => {
                value > best_value
                    || (value == best_value
                        && (libm::fabs(h - d) < libm::fabs(best_h - d)
                            || (libm::fabs(h - d) == libm::fabs(best_h - d) && h < best_h)))
            }
        };
        if better {
            best = Some((value, h));
        }
    }
    best.map(|(_, h)| h).ok_or(EnsembleError::EmptyGrid)
}

/// Post-NMS AP of one category's detections at one threshold: NMS per image,
/// pool, match, integrate.
fn category_ap_at(
    dets: &[Detection],
    gts: &[GroundTruthBox],
    threshold: f64,
    iou_thr: f64,
) -> Result<f64, EnsembleError> {
    let mut by_image: BTreeMap<&str, Vec<Detection>> = BTreeMap::new();
    for det in dets {
        by_image
            .entry(det.image_id.as_str())
            .or_default()
            .push(det.clone());
    }
    let mut kept: Vec<Detection> = Vec::new();
    for group in by_image.into_values() {
        kept.extend(nms(&group, threshold)?);
    }
    let matches = match_detections(&kept, gts, iou_thr)?;
    let ap = matches
        .per_label
        .values()
        .next()
        .and_then(average_precision)
        .unwrap_or(0.0);
    Ok(ap)
}

/// Threshold search for one category: `dets` and `gts` must already be
/// restricted to that category (post-expansion), with at least one ground
/// truth. Returns the winning threshold and the full `(threshold, AP)`
/// profile.
pub fn search_category_threshold(
    dets: &[Detection],
    gts: &[GroundTruthBox],
    grid: &[f64],
    d: f64,
    mode: SearchMode,
    lambda: f64,
    iou_thr: f64,
) -> Result<(f64, Vec<(f64, f64)>), EnsembleError> {
    validate_search_params(grid, d, mode, lambda)?;
    if gts.is_empty() {
        return Err(EnsembleError::EmptyGroundTruth);
    }
    let mut profile = Vec::with_capacity(grid.len());
    for &h in grid {
        profile.push((h, category_ap_at(dets, gts, h, iou_thr)?));
    }
    let winner = best_threshold(&profile, d, mode, lambda)?;
    Ok((winner, profile))
}

/// Per-category threshold search over hierarchy-expanded detections and
/// ground truth. Categories without ground truth keep the default threshold
/// (no table entry).
#[allow(clippy::too_many_arguments)]
pub fn search_nms_thresholds(
    dets: &[Detection],
    gts: &[GroundTruthBox],
    hierarchy: &LabelHierarchy,
    d: f64,
    grid: &[f64],
    mode: SearchMode,
    lambda: f64,
    iou_thr: f64,
) -> Result<ThresholdTable, EnsembleError> {
    validate_search_params(grid, d, mode, lambda)?;
    let gts = hierarchy.expand_ground_truth(gts)?;
    let dets = hierarchy.expand_detections(dets, ExpansionMode::Ancestors)?;
    let mut table = ThresholdTable::new(d)?;
    let mut labels: BTreeSet<&LabelId> = BTreeSet::new();
    labels.extend(gts.iter().map(|g| &g.label));
    for label in labels {
        let label_dets: Vec<Detection> = dets
            .iter()
            .filter(|det| &det.label == label)
            .cloned()
            .collect();
        let label_gts: Vec<GroundTruthBox> = gts
            .iter()
            .filter(|gt| &gt.label == label)
            .cloned()
            .collect();
        let (winner, _) =
            search_category_threshold(&label_dets, &label_gts, grid, d, mode, lambda, iou_thr)?;
        table.insert(label.clone(), winner)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::BBox;
    use crate::labelspace::LabelNode;

    fn lid(s: &str) -> LabelId {
        LabelId::new(s).unwrap()
    }

    fn bbox(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn det(image: &str, label: &str, score: f64, b: BBox) -> Detection {
        Detection::new(image, lid(label), score, b).unwrap()
    }

    fn run(id: &str, dets: Vec<Detection>, aps: &[(&str, f64)]) -> ModelRun {
        ModelRun {
            model_id: id.into(),
            detections: dets,
            per_category_ap: aps.iter().map(|(l, v)| (lid(l), *v)).collect(),
        }
    }

    #[test]
    fn weight_at_max_is_one() {
        assert_eq!(category_weight(0.6, 0.4, 0.6, 0.2).unwrap(), 1.0);
    }

    #[test]
    fn weight_at_mean_is_alpha() {
        assert_eq!(category_weight(0.4, 0.4, 0.6, 0.2).unwrap(), 0.2);
    }

    #[test]
    fn weight_interpolates() {
        let w = category_weight(0.5, 0.4, 0.6, 0.2).unwrap();
        assert!((w - 0.6).abs() < 1e-12); // 0.5 + 0.2 * 0.5
    }

    #[test]
    fn weight_clamps_below_mean() {
        assert_eq!(category_weight(0.1, 0.4, 0.6, 0.2).unwrap(), 0.2);
    }

    #[test]
    fn weight_degenerate_tie_is_one() {
        assert_eq!(category_weight(0.5, 0.5, 0.5, 0.2).unwrap(), 1.0);
    }

    #[test]
    fn weight_validates_inputs() {
        assert!(matches!(
            category_weight(0.5, 0.4, 0.6, 1.5),
            Err(EnsembleError::InvalidAlpha(_))
        ));
        assert!(matches!(
            category_weight(0.5, 0.7, 0.6, 0.2),
            Err(EnsembleError::InvalidBounds { .. })
        ));
    }

    #[test]
    fn single_model_gets_weight_one() {
        let table = weight_table(&[run("m", vec![], &[("a", 0.3)])], 0.1).unwrap();
        assert_eq!(table.get("m", &lid("a")), Some(1.0));
    }

    #[test]
    fn two_model_table_matches_hand_values() {
        let table = weight_table(
            &[
                run("m1", vec![], &[("a", 0.2)]),
                run("m2", vec![], &[("a", 0.8)]),
            ],
            0.1,
        )
        .unwrap();
        // mu = 0.5, t = 0.8: m2 at max -> 1; m1 below mean -> alpha
        assert_eq!(table.get("m2", &lid("a")), Some(1.0));
        assert_eq!(table.get("m1", &lid("a")), Some(0.1));
    }

    #[test]
    fn equal_models_all_weigh_one() {
        let table = weight_table(
            &[
                run("m1", vec![], &[("a", 0.4)]),
                run("m2", vec![], &[("a", 0.4)]),
            ],
            0.3,
        )
        .unwrap();
        assert_eq!(table.get("m1", &lid("a")), Some(1.0));
        assert_eq!(table.get("m2", &lid("a")), Some(1.0));
    }

    #[test]
    fn empty_runs_rejected() {
        assert_eq!(
            weight_table(&[], 0.1).unwrap_err(),
            EnsembleError::EmptyRuns
        );
    }

    #[test]
    fn reweight_scales_and_clamps() {
        let b = bbox(0.1, 0.1, 0.4, 0.4);
        let model = run("m", vec![det("im", "a", 0.8, b)], &[("a", 0.2)]);
        let other = run("m2", vec![], &[("a", 0.8)]);
        let table = weight_table(&[model.clone(), other], 0.6).unwrap();
        // m below mean -> weight 0.6 -> 0.8 * 0.6 = 0.48
        let out = reweight_detections(&model, &table).unwrap();
        assert!((out[0].score - 0.48).abs() < 1e-12);
    }

    #[test]
    fn reweight_weight_one_is_identity() {
        let b = bbox(0.1, 0.1, 0.4, 0.4);
        let model = run("m", vec![det("im", "a", 0.8, b)], &[("a", 0.5)]);
        let table = weight_table(std::slice::from_ref(&model), 0.1).unwrap();
        let out = reweight_detections(&model, &table).unwrap();
        assert_eq!(out[0].score, 0.8);
    }

    #[test]
    fn reweight_alpha_zero_zeroes_scores() {
        let b = bbox(0.1, 0.1, 0.4, 0.4);
        let weak = run("weak", vec![det("im", "a", 0.8, b)], &[("a", 0.1)]);
        let strong = run("strong", vec![], &[("a", 0.9)]);
        let table = weight_table(&[weak.clone(), strong], 0.0).unwrap();
        let out = reweight_detections(&weak, &table).unwrap();
        assert_eq!(out[0].score, 0.0);
    }

    #[test]
    fn reweight_missing_weight_errors() {
        let b = bbox(0.1, 0.1, 0.4, 0.4);
        let model = run("m", vec![det("im", "mystery", 0.8, b)], &[("a", 0.5)]);
        let table = weight_table(std::slice::from_ref(&model), 0.1).unwrap();
        assert!(matches!(
            reweight_detections(&model, &table),
            Err(EnsembleError::MissingWeight { .. })
        ));
    }

    #[test]
    fn reweight_preserves_order_within_category() {
        let model = run(
            "m",
            vec![
                det("im", "a", 0.9, bbox(0.1, 0.1, 0.4, 0.4)),
                det("im", "a", 0.7, bbox(0.5, 0.5, 0.8, 0.8)),
                det("im", "a", 0.3, bbox(0.2, 0.6, 0.5, 0.9)),
            ],
            &[("a", 0.2)],
        );
        let other = run("m2", vec![], &[("a", 0.6)]);
        let table = weight_table(&[model.clone(), other], 0.25).unwrap();
        let out = reweight_detections(&model, &table).unwrap();
        assert!(out[0].score > out[1].score && out[1].score > out[2].score);
    }

    #[test]
    fn classifier_reweight_multiplies() {
        let b = bbox(0.1, 0.1, 0.4, 0.4);
        let d = det("im", "a", 0.9, b);
        let mut scores = BTreeMap::new();
        scores.insert(ClassifierKey::for_detection(&d), 0.5);
        let out = classifier_reweight(&[d], &scores, MissingScore::Passthrough).unwrap();
        assert!((out[0].score - 0.45).abs() < 1e-12);
    }

    #[test]
    fn classifier_reweight_identity_score() {
        let b = bbox(0.1, 0.1, 0.4, 0.4);
        let d = det("im", "a", 0.9, b);
        let mut scores = BTreeMap::new();
        scores.insert(ClassifierKey::for_detection(&d), 1.0);
        let out = classifier_reweight(std::slice::from_ref(&d), &scores, MissingScore::Passthrough)
            .unwrap();
        assert_eq!(out[0], d);
    }

    #[test]
    fn classifier_reweight_missing_entry_modes() {
        let b = bbox(0.1, 0.1, 0.4, 0.4);
        let d = det("im", "a", 0.9, b);
        let scores = BTreeMap::new();
        let passthrough =
            classifier_reweight(std::slice::from_ref(&d), &scores, MissingScore::Passthrough)
                .unwrap();
        assert_eq!(passthrough, vec![d.clone()]);
        let dropped = classifier_reweight(&[d], &scores, MissingScore::Drop).unwrap();
        assert!(dropped.is_empty());
    }

    #[test]
    fn classifier_reweight_range_checked() {
        let b = bbox(0.1, 0.1, 0.4, 0.4);
        let d = det("im", "a", 0.9, b);
        let mut scores = BTreeMap::new();
        scores.insert(ClassifierKey::for_detection(&d), 1.5);
        assert!(matches!(
            classifier_reweight(&[d], &scores, MissingScore::Passthrough),
            Err(EnsembleError::ClassifierScoreOutOfRange(_))
        ));
    }

    fn subsets(pairs: &[(&str, &[&str])]) -> BTreeMap<String, BTreeSet<LabelId>> {
        pairs
            .iter()
            .map(|(m, labels)| (String::from(*m), labels.iter().map(|l| lid(l)).collect()))
            .collect()
    }

    #[test]
    fn consensus_keeps_overlapped_labels_only() {
        let b = bbox(0.1, 0.1, 0.4, 0.4);
        let runs = [
            run(
                "e1",
                vec![det("im", "a", 0.9, b), det("im", "b", 0.8, b)],
                &[],
            ),
            run("e2", vec![det("im", "c", 0.7, b)], &[]),
        ];
        let declared = subsets(&[("e1", &["a", "b"]), ("e2", &["b", "c"])]);
        let out = expert_consensus(&runs, &declared).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].label, lid("b"));
    }

    #[test]
    fn consensus_single_expert_drops_everything() {
        let b = bbox(0.1, 0.1, 0.4, 0.4);
        let runs = [run("e1", vec![det("im", "a", 0.9, b)], &[])];
        let declared = subsets(&[("e1", &["a"])]);
        assert!(expert_consensus(&runs, &declared).unwrap().is_empty());
    }

    #[test]
    fn consensus_identical_subsets_keep_everything() {
        let b = bbox(0.1, 0.1, 0.4, 0.4);
        let runs = [
            run("e1", vec![det("im", "a", 0.9, b)], &[]),
            run("e2", vec![det("im", "a", 0.8, b)], &[]),
        ];
        let declared = subsets(&[("e1", &["a"]), ("e2", &["a"])]);
        assert_eq!(expert_consensus(&runs, &declared).unwrap().len(), 2);
    }

    #[test]
    fn consensus_rejects_out_of_subset_detection() {
        let b = bbox(0.1, 0.1, 0.4, 0.4);
        let runs = [run("e1", vec![det("im", "zz", 0.9, b)], &[])];
        let declared = subsets(&[("e1", &["a"])]);
        assert!(matches!(
            expert_consensus(&runs, &declared),
            Err(EnsembleError::DetectionOutsideSubset { .. })
        ));
    }

    #[test]
    fn fuse_single_model_equals_per_class_nms() {
        let close_a = bbox(0.1, 0.1, 0.4, 0.4);
        let close_b = bbox(0.12, 0.1, 0.42, 0.4);
        let far = bbox(0.6, 0.6, 0.9, 0.9);
        let model = run(
            "m",
            vec![
                det("im", "a", 0.9, close_a),
                det("im", "a", 0.8, close_b),
                det("im", "a", 0.7, far),
            ],
            &[("a", 0.5)],
        );
        let table = weight_table(std::slice::from_ref(&model), 1.0).unwrap();
        let thresholds = ThresholdTable::new(0.5).unwrap();
        let fused = fuse(std::slice::from_ref(&model), &table, &thresholds).unwrap();
        let direct = nms(&model.detections, 0.5).unwrap();
        assert_eq!(fused, direct);
    }

    #[test]
    fn fuse_identical_box_across_models_keeps_top() {
        let b = bbox(0.1, 0.1, 0.4, 0.4);
        let m1 = run("m1", vec![det("im", "a", 0.9, b)], &[("a", 0.5)]);
        let m2 = run("m2", vec![det("im", "a", 0.7, b)], &[("a", 0.5)]);
        let table = weight_table(&[m1.clone(), m2.clone()], 1.0).unwrap();
        let thresholds = ThresholdTable::new(0.5).unwrap();
        let fused = fuse(&[m1, m2], &table, &thresholds).unwrap();
        assert_eq!(fused.len(), 1);
        assert_eq!(fused[0].score, 0.9);
    }

    #[test]
    fn fuse_disjoint_labels_is_union() {
        let m1 = run(
            "m1",
            vec![det("im", "a", 0.9, bbox(0.1, 0.1, 0.4, 0.4))],
            &[("a", 0.5)],
        );
        let m2 = run(
            "m2",
            vec![det("im", "b", 0.7, bbox(0.5, 0.5, 0.9, 0.9))],
            &[("b", 0.5)],
        );
        let table = weight_table(&[m1.clone(), m2.clone()], 1.0).unwrap();
        let thresholds = ThresholdTable::new(0.5).unwrap();
        let fused = fuse(&[m1, m2], &table, &thresholds).unwrap();
        assert_eq!(fused.len(), 2);
    }

    #[test]
    fn flat_profile_penalty_picks_nearest_default() {
        let profile: Vec<(f64, f64)> = [0.3, 0.4, 0.6, 0.7].iter().map(|&h| (h, 0.5)).collect();
        // 0.55 sits between 0.6 (distance 0.05) and 0.4 (0.15)
        let h = best_threshold(&profile, 0.55, SearchMode::Penalty, 1.0).unwrap();
        assert_eq!(h, 0.6);
    }

    #[test]
    fn flat_profile_equidistant_tie_takes_smaller() {
        let profile: Vec<(f64, f64)> = [0.4, 0.6].iter().map(|&h| (h, 0.5)).collect();
        let h = best_threshold(&profile, 0.5, SearchMode::Penalty, 1.0).unwrap();
        assert_eq!(h, 0.4);
    }

    #[test]
    fn lambda_zero_is_pure_argmax() {
        let profile = alloc::vec![(0.3, 0.2), (0.4, 0.5), (0.6, 0.9), (0.7, 0.1)];
        let h = best_threshold(&profile, 0.5, SearchMode::Penalty, 0.0).unwrap();
        assert_eq!(h, 0.6);
    }

    #[test]
    fn paper_mode_flat_profile_hugs_default() {
        let profile: Vec<(f64, f64)> = [0.3, 0.4, 0.6, 0.7].iter().map(|&h| (h, 0.5)).collect();
        let h = best_threshold(&profile, 0.45, SearchMode::Paper, 0.0).unwrap();
        assert_eq!(h, 0.4);
    }

    #[test]
    fn paper_mode_rejects_default_on_grid() {
        let profile = alloc::vec![(0.5, 0.2), (0.6, 0.9)];
        assert!(matches!(
            best_threshold(&profile, 0.5, SearchMode::Paper, 0.0),
            Err(EnsembleError::GridContainsDefault(_))
        ));
    }

    #[test]
    fn empty_grid_rejected() {
        assert_eq!(
            best_threshold(&[], 0.5, SearchMode::Penalty, 1.0).unwrap_err(),
            EnsembleError::EmptyGrid
        );
    }

    fn flat_hierarchy(labels: &[&str]) -> LabelHierarchy {
        LabelHierarchy::new(
            labels
                .iter()
                .map(|l| LabelNode {
                    id: lid(l),
                    name: l.to_uppercase(),
                })
                .collect(),
            vec![],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn threshold_search_prefers_looser_nms_when_gt_is_dense() {
        // Two true objects overlapping at IoU just above 0.35: a tight
        // threshold suppresses the second detection and halves recall.
        let g1 = bbox(0.0, 0.0, 0.3, 1.0);
        let g2 = bbox(0.14, 0.0, 0.44, 1.0);
        let gts = alloc::vec![
            GroundTruthBox {
                image_id: "im".into(),
                label: lid("a"),
                bbox: g1
            },
            GroundTruthBox {
                image_id: "im".into(),
                label: lid("a"),
                bbox: g2
            },
        ];
        let dets = alloc::vec![det("im", "a", 0.9, g1), det("im", "a", 0.8, g2)];
        let h = flat_hierarchy(&["a"]);
        let grid = [0.3, 0.4, 0.5, 0.6];
        let table =
            search_nms_thresholds(&dets, &gts, &h, 0.5, &grid, SearchMode::Penalty, 0.0, 0.5)
                .unwrap();
        // IoU(g1, g2) = 0.16/0.44 ≈ 0.364: thresholds ≥ 0.4 keep both (AP 1),
        // 0.3 suppresses one (AP 0.5). With lambda 0, ties above 0.364 break
        // toward the default 0.5.
        assert_eq!(table.get(&lid("a")), 0.5);
    }

    #[test]
    fn threshold_search_profile_matches_manual_scan() {
        let g1 = bbox(0.0, 0.0, 0.3, 1.0);
        let g2 = bbox(0.14, 0.0, 0.44, 1.0);
        let gts = alloc::vec![
            GroundTruthBox {
                image_id: "im".into(),
                label: lid("a"),
                bbox: g1
            },
            GroundTruthBox {
                image_id: "im".into(),
                label: lid("a"),
                bbox: g2
            },
        ];
        let dets = alloc::vec![det("im", "a", 0.9, g1), det("im", "a", 0.8, g2)];
        let grid = [0.3, 0.4];
        let (winner, profile) =
            search_category_threshold(&dets, &gts, &grid, 0.45, SearchMode::Penalty, 0.0, 0.5)
                .unwrap();
        assert_eq!(profile.len(), 2);
        assert!((profile[0].1 - 0.5).abs() < 1e-12);
        assert!((profile[1].1 - 1.0).abs() < 1e-12);
        assert_eq!(winner, 0.4);
    }

    #[test]
    fn threshold_search_requires_ground_truth() {
        let dets = alloc::vec![det("im", "a", 0.9, bbox(0.1, 0.1, 0.4, 0.4))];
        assert_eq!(
            search_category_threshold(&dets, &[], &[0.5], 0.4, SearchMode::Penalty, 0.0, 0.5)
                .unwrap_err(),
            EnsembleError::EmptyGroundTruth
        );
    }

    #[test]
    fn threshold_table_defaults_and_overrides() {
        let mut table = ThresholdTable::new(0.5).unwrap();
        table.insert(lid("a"), 0.7).unwrap();
        assert_eq!(table.get(&lid("a")), 0.7);
        assert_eq!(table.get(&lid("zz")), 0.5);
        assert!(ThresholdTable::new(0.0).is_err());
    }
}
