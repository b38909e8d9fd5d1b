//! `nms-search`: per-category NMS threshold search. Categories are
//! independent, so `--jobs` distributes them over a thread pool; results are
//! assembled in label order and identical to the sequential run.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;

use detkit_core::boxes::{Detection, GroundTruthBox};
use detkit_core::ensembling::{
    search_category_threshold, search_nms_thresholds, SearchMode, ThresholdTable,
};
use detkit_core::labelspace::{ExpansionMode, LabelId};

use super::Globals;
use crate::error::{data_error, ensemble_error, PipelineError};
use crate::formats::csv_io;

fn parse_mode(mode: &str) -> Result<SearchMode, PipelineError> {
    match mode {
        "penalty" => Ok(SearchMode::Penalty),
        "paper" => Ok(SearchMode::Paper),
        other => Err(PipelineError::usage(format!(
            "--mode must be penalty or paper, got {other:?}"
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    globals: &Globals,
    detections: &Path,
    ground_truth: &Path,
    grid: &[f64],
    default_threshold: f64,
    mode: &str,
    lambda: f64,
    iou: f64,
    oi_order: bool,
    out: &Path,
) -> Result<(), PipelineError> {
    let hierarchy = globals.require_hierarchy("nms-search")?;
    let mode = parse_mode(mode)?;
    let dets = csv_io::read_detections(detections, oi_order)?;
    let gts = csv_io::read_ground_truth(ground_truth, oi_order)?;

    let table = if globals.jobs <= 1 {
        search_nms_thresholds(
            &dets,
            &gts,
            &hierarchy,
            default_threshold,
            grid,
            mode,
            lambda,
            iou,
        )
        .map_err(|e| ensemble_error("nms-search", e))?
    } else {
        // same per-category primitive, fanned out across the pool
        let gts = hierarchy
            .expand_ground_truth(&gts)
            .map_err(|e| data_error("nms-search", e))?;
        let dets = hierarchy
            .expand_detections(&dets, ExpansionMode::Ancestors)
            .map_err(|e| data_error("nms-search", e))?;
        let labels: BTreeSet<LabelId> = gts.iter().map(|g| g.label.clone()).collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(globals.jobs)
            .build()
            .map_err(|e| PipelineError::data(format!("nms-search: thread pool: {e}")))?;
        let per_label: Result<Vec<(LabelId, f64)>, PipelineError> = pool.install(|| {
            labels
                .into_iter()
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|label| {
                    let label_dets: Vec<Detection> =
                        dets.iter().filter(|d| d.label == label).cloned().collect();
                    let label_gts: Vec<GroundTruthBox> =
                        gts.iter().filter(|g| g.label == label).cloned().collect();
                    let (winner, _) = search_category_threshold(
                        &label_dets,
                        &label_gts,
                        grid,
                        default_threshold,
                        mode,
                        lambda,
                        iou,
                    )
                    .map_err(|e| ensemble_error("nms-search", e))?;
                    Ok((label, winner))
                })
                .collect()
        });
        let mut table =
            ThresholdTable::new(default_threshold).map_err(|e| ensemble_error("nms-search", e))?;
        for (label, winner) in per_label? {
            table
                .insert(label, winner)
                .map_err(|e| ensemble_error("nms-search", e))?;
        }
        table
    };
    csv_io::write_thresholds(&table, out)
}
