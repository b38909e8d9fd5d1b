//! `expand`: hierarchy expansion of a ground-truth or detection file, the
//! same duplication the evaluator applies internally.

use std::path::{Path, PathBuf};

use detkit_core::labelspace::ExpansionMode;

use super::Globals;
use crate::error::{data_error, PipelineError};
use crate::formats::csv_io;

fn parse_mode(mode: &str) -> Result<ExpansionMode, PipelineError> {
    match mode {
        "ancestors" => Ok(ExpansionMode::Ancestors),
        "ancestors+ambiguity" => Ok(ExpansionMode::AncestorsAndAmbiguity),
        other => Err(PipelineError::usage(format!(
            "--mode must be ancestors or ancestors+ambiguity, got {other:?}"
        ))),
    }
}

pub fn run(
    globals: &Globals,
    detections: Option<PathBuf>,
    ground_truth: Option<PathBuf>,
    mode: &str,
    oi_order: bool,
    out: &Path,
) -> Result<(), PipelineError> {
    let hierarchy = globals.require_hierarchy("expand")?;
    let mode = parse_mode(mode)?;
    match (detections, ground_truth) {
        (Some(path), None) => {
            let dets = csv_io::read_detections(&path, oi_order)?;
            let expanded = hierarchy
                .expand_detections(&dets, mode)
                .map_err(|e| data_error("expand", e))?;
            csv_io::write_detections(&expanded, out)
        }
        (None, Some(path)) => {
            let gts = csv_io::read_ground_truth(&path, oi_order)?;
            let expanded = hierarchy
                .expand_ground_truth(&gts)
                .map_err(|e| data_error("expand", e))?;
            csv_io::write_ground_truth(&expanded, out)
        }
        _ => Err(PipelineError::usage(
            "expand needs exactly one of --detections or --ground-truth",
        )),
    }
}
