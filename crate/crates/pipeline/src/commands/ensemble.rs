//! `ensemble`: load the manifest's model runs, build the per-category
//! weight table, and fuse with per-category NMS.

use std::path::{Path, PathBuf};

use detkit_core::ensembling::{fuse, weight_table, ModelRun, ThresholdTable};

use crate::error::{ensemble_error, PipelineError};
use crate::formats::{csv_io, json_docs};

pub fn run(
    manifest_path: &Path,
    thresholds_path: Option<PathBuf>,
    default_threshold: f64,
    oi_order: bool,
    out: &Path,
) -> Result<(), PipelineError> {
    let (manifest, base) = json_docs::load_manifest(manifest_path)?;
    let mut runs = Vec::with_capacity(manifest.models.len());
    for model in &manifest.models {
        let det_path = json_docs::resolve_manifest_path(&base, &model.detections_csv);
        let ap_path = json_docs::resolve_manifest_path(&base, &model.ap_csv);
        runs.push(ModelRun {
            model_id: model.id.clone(),
            detections: csv_io::read_detections(&det_path, oi_order)?,
            per_category_ap: csv_io::read_ap_table(&ap_path)?,
        });
    }
    let weights = weight_table(&runs, manifest.alpha).map_err(|e| ensemble_error("ensemble", e))?;
    let mut thresholds =
        ThresholdTable::new(default_threshold).map_err(|e| ensemble_error("ensemble", e))?;
    if let Some(path) = thresholds_path {
        for (label, threshold) in csv_io::read_thresholds(&path)? {
            thresholds
                .insert(label, threshold)
                .map_err(|e| ensemble_error("ensemble", e))?;
        }
    }
    let fused = fuse(&runs, &weights, &thresholds).map_err(|e| ensemble_error("ensemble", e))?;
    csv_io::write_detections(&fused, out)
}
