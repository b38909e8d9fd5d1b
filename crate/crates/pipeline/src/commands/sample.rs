//! `sample`: class-aware two-stage draws plus the per-category exposure
//! histogram.

use std::path::Path;

use detkit_core::sampling::{build_index, exposure_histogram, sample_epoch};

use super::Globals;
use crate::error::{data_error, PipelineError};
use crate::formats::{atomic::write_atomic, csv_io};

pub fn run(
    globals: &Globals,
    ground_truth: &Path,
    draws: usize,
    oi_order: bool,
    draws_out: &Path,
    histogram_out: &Path,
) -> Result<(), PipelineError> {
    let gts = csv_io::read_ground_truth(ground_truth, oi_order)?;
    let index = build_index(&gts);
    let stream = sample_epoch(&index, draws, globals.seed).map_err(|e| data_error("sample", e))?;

    let mut draw_rows = String::from("Category,ImageID\n");
    for (category, image) in &stream.draws {
        draw_rows.push_str(&format!("{category},{image}\n"));
    }
    write_atomic(draws_out, draw_rows.as_bytes())?;

    let histogram = exposure_histogram(&stream, &index);
    let mut histogram_rows = String::from("Category,Count\n");
    for (category, count) in &histogram {
        histogram_rows.push_str(&format!("{category},{count}\n"));
    }
    write_atomic(histogram_out, histogram_rows.as_bytes())
}
