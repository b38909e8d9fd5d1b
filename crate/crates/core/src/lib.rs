//! Core primitives for post-processing, sampling, and evaluating large-vocabulary
//! object detection outputs.
//!
//! The crate is `no_std` (with `alloc`) so the algorithmic layer stays free of
//! platform concerns; file formats and the CLI live in the companion
//! `detkit-pipeline` crate. Everything here operates on plain in-memory values:
//! detections and ground-truth boxes in normalized coordinates, a label
//! hierarchy, logit vectors, and scale/architecture plans.
//!
//! Modules:
//! - [`labelspace`]: hierarchical tag system, ancestor/ambiguity expansion
//! - [`boxes`]: box geometry, IoU, greedy per-class NMS
//! - [`evaluation`]: detection matching, average precision, hierarchical mAP,
//!   confusion mining
//! - [`loss`]: standard and distributed softmax cross-entropy with gradients
//! - [`sampling`]: class-aware two-stage image sampling
//! - [`ensembling`]: per-category re-weighting, consensus filtering, fusion,
//!   NMS-threshold search
//! - [`scaling`]: constrained grid search and compound scaling of
//!   depth/width/resolution triples
//! - [`augment`]: auto-augmentation policy engine over raster images and boxes

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod augment;
pub mod boxes;
pub mod ensembling;
pub mod evaluation;
pub mod labelspace;
pub mod loss;
pub mod rng;
pub mod sampling;
pub mod scaling;

pub use boxes::{BBox, Detection, GroundTruthBox};
pub use labelspace::{LabelHierarchy, LabelId};
