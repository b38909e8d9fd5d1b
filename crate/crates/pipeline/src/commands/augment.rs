//! `augment`: apply a policy to one PPM image and its box list.

use std::path::{Path, PathBuf};

use detkit_core::augment::{apply_policy, default_policy};
use detkit_core::rng::seeded;

use super::Globals;
use crate::error::{data_error, PipelineError};
use crate::formats::{csv_io, json_docs, ppm};

pub fn run(
    globals: &Globals,
    image: &Path,
    boxes: &Path,
    policy: Option<PathBuf>,
    image_out: &Path,
    boxes_out: &Path,
) -> Result<(), PipelineError> {
    let img = ppm::read_ppm(image)?;
    let input_boxes = csv_io::read_boxes(boxes)?;
    let policy = match policy {
        Some(path) => json_docs::load_policy(&path)?,
        None => default_policy(),
    };
    let mut rng = seeded(globals.seed);
    let (out_img, out_boxes) = apply_policy(&img, &input_boxes, &policy, &mut rng)
        .map_err(|e| data_error("augment", e))?;
    ppm::write_ppm(&out_img, image_out)?;
    csv_io::write_boxes(&out_boxes, boxes_out)
}
