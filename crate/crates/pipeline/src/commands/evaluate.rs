//! `evaluate`: hierarchical mAP over detection and ground-truth CSVs.

use std::path::Path;

use detkit_core::evaluation::hierarchical_map;

use super::Globals;
use crate::error::{data_error, PipelineError};
use crate::formats::csv_io;

pub fn run(
    globals: &Globals,
    detections: &Path,
    ground_truth: &Path,
    iou: f64,
    oi_order: bool,
    ap_out: &Path,
) -> Result<(), PipelineError> {
    let hierarchy = globals.require_hierarchy("evaluate")?;
    let dets = csv_io::read_detections(detections, oi_order)?;
    let gts = csv_io::read_ground_truth(ground_truth, oi_order)?;
    let report =
        hierarchical_map(&dets, &gts, &hierarchy, iou).map_err(|e| data_error("evaluate", e))?;
    csv_io::write_ap_report(&report, ap_out)?;
    println!("mAP: {:.6}", report.mean_ap);
    if !report.labels_without_gt.is_empty() {
        let labels: Vec<&str> = report
            .labels_without_gt
            .iter()
            .map(|l| l.as_str())
            .collect();
        println!("labels-without-ground-truth: {}", labels.join(","));
    }
    Ok(())
}
