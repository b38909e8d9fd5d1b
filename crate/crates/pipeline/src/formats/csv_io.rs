//! CSV readers and writers for detections, ground truth, AP tables,
//! thresholds, plain boxes, and raw numeric rows.
//!
//! Headers are validated exactly, including column order. Box columns are
//! `XMin,YMin,XMax,YMax` by default; `oi_order` accepts the
//! `XMin,XMax,YMin,YMax` ordering instead. All numeric output is serialized
//! at six decimals and rows are written in a canonical sort order, so equal
//! inputs always produce byte-identical files.

use std::collections::BTreeMap;
use std::path::Path;

use detkit_core::boxes::{BBox, Detection, GroundTruthBox};
use detkit_core::ensembling::ThresholdTable;
use detkit_core::evaluation::EvalReport;
use detkit_core::labelspace::LabelId;

use super::atomic::write_atomic;
use crate::error::PipelineError;

const DET_HEADER: [&str; 7] = [
    "ImageID",
    "LabelName",
    "Score",
    "XMin",
    "YMin",
    "XMax",
    "YMax",
];
const DET_HEADER_OI: [&str; 7] = [
    "ImageID",
    "LabelName",
    "Score",
    "XMin",
    "XMax",
    "YMin",
    "YMax",
];
const GT_HEADER: [&str; 6] = ["ImageID", "LabelName", "XMin", "YMin", "XMax", "YMax"];
const GT_HEADER_OI: [&str; 6] = ["ImageID", "LabelName", "XMin", "XMax", "YMin", "YMax"];
const BOX_HEADER: [&str; 4] = ["XMin", "YMin", "XMax", "YMax"];

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, PipelineError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| PipelineError::data(format!("cannot read {}: {e}", path.display())))
}

fn check_header(
    path: &Path,
    reader: &mut csv::Reader<std::fs::File>,
    expected: &[&str],
) -> Result<(), PipelineError> {
    let headers = reader
        .headers()
        .map_err(|e| PipelineError::data(format!("{}: {e}", path.display())))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(PipelineError::data(format!(
            "{}: header must be exactly {:?}, got {:?}",
            path.display(),
            expected.join(","),
            got.join(","),
        )));
    }
    Ok(())
}

fn parse_f64(path: &Path, line: usize, field: &str, raw: &str) -> Result<f64, PipelineError> {
    raw.trim().parse::<f64>().map_err(|_| {
        PipelineError::data(format!(
            "{}: line {line}: {field} value {raw:?} is not a number",
            path.display()
        ))
    })
}

/// Reorders raw box fields into (x_min, y_min, x_max, y_max).
fn box_fields(raw: [f64; 4], oi_order: bool) -> (f64, f64, f64, f64) {
    if oi_order {
        // file order XMin,XMax,YMin,YMax
        (raw[0], raw[2], raw[1], raw[3])
    } else {
        (raw[0], raw[1], raw[2], raw[3])
    }
}

fn parse_bbox(
    path: &Path,
    line: usize,
    fields: &[&str],
    oi_order: bool,
) -> Result<BBox, PipelineError> {
    let names = if oi_order {
        ["XMin", "XMax", "YMin", "YMax"]
    } else {
        BOX_HEADER
    };
    let mut raw = [0.0f64; 4];
    for (slot, (name, value)) in raw.iter_mut().zip(names.iter().zip(fields)) {
        *slot = parse_f64(path, line, name, value)?;
    }
    let (x_min, y_min, x_max, y_max) = box_fields(raw, oi_order);
    BBox::new(x_min, y_min, x_max, y_max)
        .map_err(|e| PipelineError::data(format!("{}: line {line}: {e}", path.display())))
}

fn parse_label(path: &Path, line: usize, raw: &str) -> Result<LabelId, PipelineError> {
    LabelId::new(raw)
        .map_err(|e| PipelineError::data(format!("{}: line {line}: {e}", path.display())))
}

pub fn read_detections(path: &Path, oi_order: bool) -> Result<Vec<Detection>, PipelineError> {
    let mut reader = open_reader(path)?;
    let expected: &[&str] = if oi_order {
        &DET_HEADER_OI
    } else {
        &DET_HEADER
    };
    check_header(path, &mut reader, expected)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let record = record
            .map_err(|e| PipelineError::data(format!("{}: line {line}: {e}", path.display())))?;
        if record.len() != 7 {
            return Err(PipelineError::data(format!(
                "{}: line {line}: expected 7 fields, got {}",
                path.display(),
                record.len()
            )));
        }
        let label = parse_label(path, line, &record[1])?;
        let score = parse_f64(path, line, "Score", &record[2])?;
        let fields: Vec<&str> = (3..7).map(|j| &record[j]).collect();
        let bbox = parse_bbox(path, line, &fields, oi_order)?;
        let det = Detection::new(record[0].to_string(), label, score, bbox)
            .map_err(|e| PipelineError::data(format!("{}: line {line}: {e}", path.display())))?;
        out.push(det);
    }
    Ok(out)
}

pub fn read_ground_truth(
    path: &Path,
    oi_order: bool,
) -> Result<Vec<GroundTruthBox>, PipelineError> {
    let mut reader = open_reader(path)?;
    let expected: &[&str] = if oi_order { &GT_HEADER_OI } else { &GT_HEADER };
    check_header(path, &mut reader, expected)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record
            .map_err(|e| PipelineError::data(format!("{}: line {line}: {e}", path.display())))?;
        if record.len() != 6 {
            return Err(PipelineError::data(format!(
                "{}: line {line}: expected 6 fields, got {}",
                path.display(),
                record.len()
            )));
        }
        let label = parse_label(path, line, &record[1])?;
        let fields: Vec<&str> = (2..6).map(|j| &record[j]).collect();
        let bbox = parse_bbox(path, line, &fields, oi_order)?;
        out.push(GroundTruthBox {
            image_id: record[0].to_string(),
            label,
            bbox,
        });
    }
    Ok(out)
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

/// Canonical detection file order: image, label, descending score, box key.
pub fn write_detections(dets: &[Detection], path: &Path) -> Result<(), PipelineError> {
    let mut sorted: Vec<&Detection> = dets.iter().collect();
    sorted.sort_by(|a, b| {
        a.image_id
            .cmp(&b.image_id)
            .then_with(|| a.label.cmp(&b.label))
            .then_with(|| b.score.total_cmp(&a.score))
            .then_with(|| a.bbox.rounded_key().cmp(&b.bbox.rounded_key()))
    });
    let mut out = String::from("ImageID,LabelName,Score,XMin,YMin,XMax,YMax\n");
    for det in sorted {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            det.image_id,
            det.label,
            fmt6(det.score),
            fmt6(det.bbox.x_min()),
            fmt6(det.bbox.y_min()),
            fmt6(det.bbox.x_max()),
            fmt6(det.bbox.y_max()),
        ));
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_ground_truth(gts: &[GroundTruthBox], path: &Path) -> Result<(), PipelineError> {
    let mut sorted: Vec<&GroundTruthBox> = gts.iter().collect();
    sorted.sort_by(|a, b| {
        a.image_id
            .cmp(&b.image_id)
            .then_with(|| a.label.cmp(&b.label))
            .then_with(|| a.bbox.rounded_key().cmp(&b.bbox.rounded_key()))
    });
    let mut out = String::from("ImageID,LabelName,XMin,YMin,XMax,YMax\n");
    for gt in sorted {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            gt.image_id,
            gt.label,
            fmt6(gt.bbox.x_min()),
            fmt6(gt.bbox.y_min()),
            fmt6(gt.bbox.x_max()),
            fmt6(gt.bbox.y_max()),
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Per-label AP table: `LabelName,AP` with an optional `NumGT` column.
pub fn read_ap_table(path: &Path) -> Result<BTreeMap<LabelId, f64>, PipelineError> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| PipelineError::data(format!("{}: {e}", path.display())))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != ["LabelName", "AP"] && got != ["LabelName", "AP", "NumGT"] {
        return Err(PipelineError::data(format!(
            "{}: header must be LabelName,AP[,NumGT], got {:?}",
            path.display(),
            got.join(",")
        )));
    }
    let mut out = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record
            .map_err(|e| PipelineError::data(format!("{}: line {line}: {e}", path.display())))?;
        let label = parse_label(path, line, &record[0])?;
        let ap = parse_f64(path, line, "AP", &record[1])?;
        out.insert(label, ap);
    }
    Ok(out)
}

pub fn write_ap_report(report: &EvalReport, path: &Path) -> Result<(), PipelineError> {
    let mut out = String::from("LabelName,AP,NumGT\n");
    for (label, ap) in &report.per_label_ap {
        let num_gt = report.gt_counts.get(label).copied().unwrap_or(0);
        out.push_str(&format!("{label},{},{num_gt}\n", fmt6(*ap)));
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_thresholds(path: &Path) -> Result<Vec<(LabelId, f64)>, PipelineError> {
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &["LabelName", "Threshold"])?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record
            .map_err(|e| PipelineError::data(format!("{}: line {line}: {e}", path.display())))?;
        let label = parse_label(path, line, &record[0])?;
        let threshold = parse_f64(path, line, "Threshold", &record[1])?;
        out.push((label, threshold));
    }
    Ok(out)
}

pub fn write_thresholds(table: &ThresholdTable, path: &Path) -> Result<(), PipelineError> {
    let mut out = String::from("LabelName,Threshold\n");
    for (label, threshold) in table.iter() {
        out.push_str(&format!("{label},{}\n", fmt6(*threshold)));
    }
    write_atomic(path, out.as_bytes())
}

/// Plain box list for the augment command (one image, no labels).
pub fn read_boxes(path: &Path) -> Result<Vec<BBox>, PipelineError> {
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &BOX_HEADER)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record
            .map_err(|e| PipelineError::data(format!("{}: line {line}: {e}", path.display())))?;
        let fields: Vec<&str> = (0..4).map(|j| &record[j]).collect();
        out.push(parse_bbox(path, line, &fields, false)?);
    }
    Ok(out)
}

pub fn write_boxes(boxes: &[BBox], path: &Path) -> Result<(), PipelineError> {
    let mut out = String::from("XMin,YMin,XMax,YMax\n");
    for b in boxes {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt6(b.x_min()),
            fmt6(b.y_min()),
            fmt6(b.x_max()),
            fmt6(b.y_max())
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Headerless numeric rows (logit vectors, label-distribution vectors);
/// rows may differ in length.
pub fn read_numeric_rows(path: &Path) -> Result<Vec<Vec<f64>>, PipelineError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| PipelineError::data(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record
            .map_err(|e| PipelineError::data(format!("{}: line {line}: {e}", path.display())))?;
        let mut row = Vec::with_capacity(record.len());
        for field in record.iter() {
            row.push(parse_f64(path, line, "value", field)?);
        }
        out.push(row);
    }
    Ok(out)
}
