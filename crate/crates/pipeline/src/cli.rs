//! Command-line interface: argument definitions and dispatch.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands;
use crate::error::PipelineError;

#[derive(Debug, Parser)]
#[command(
    name = "detkit",
    version,
    about = "Detection post-processing, sampling, and evaluation toolkit",
    propagate_version = true
)]
pub struct Cli {
    /// Seed for commands that draw random numbers (sample, augment)
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for parallel subcommands (nms-search)
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// Label hierarchy JSON (required by evaluate, expand, nms-search)
    #[arg(long, global = true)]
    pub hierarchy: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hierarchical mAP over detection and ground-truth files
    Evaluate {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        /// IoU threshold for matching
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// Accept the XMin,XMax,YMin,YMax box column ordering
        #[arg(long)]
        oi_order: bool,
        /// Per-label AP table output (LabelName,AP,NumGT)
        #[arg(long)]
        ap_out: PathBuf,
    },

    /// Expand ground truth or detections to ancestor (and ambiguity) labels
    Expand {
        #[arg(long)]
        detections: Option<PathBuf>,
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        /// ancestors | ancestors+ambiguity (detections only)
        #[arg(long, default_value = "ancestors")]
        mode: String,
        #[arg(long)]
        oi_order: bool,
        #[arg(long)]
        out: PathBuf,
    },

    /// Class-aware two-stage sampling over a ground-truth file
    Sample {
        #[arg(long)]
        ground_truth: PathBuf,
        /// Number of draws
        #[arg(short = 'n', long)]
        draws: usize,
        #[arg(long)]
        oi_order: bool,
        /// Draw list output (Category,ImageID)
        #[arg(long)]
        draws_out: PathBuf,
        /// Stage-1 exposure histogram output (Category,Count)
        #[arg(long)]
        histogram_out: PathBuf,
    },

    /// Losses, gradients, and finite-difference report over logit rows
    LossCheck {
        /// Headerless CSV of logit rows
        #[arg(long)]
        logits: PathBuf,
        /// Headerless CSV of label-distribution rows (k entries of 1/k)
        #[arg(long)]
        targets: PathBuf,
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
    },

    /// Re-weight and fuse model runs listed in a manifest
    Ensemble {
        /// Manifest JSON: {"models":[{"id","detections_csv","ap_csv"}],"alpha":0.1}
        #[arg(long)]
        manifest: PathBuf,
        /// Per-category NMS thresholds CSV (LabelName,Threshold)
        #[arg(long)]
        thresholds: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        default_threshold: f64,
        #[arg(long)]
        oi_order: bool,
        /// Fused detection CSV output
        #[arg(long)]
        out: PathBuf,
    },

    /// Per-category NMS threshold search against validation ground truth
    NmsSearch {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        /// Candidate thresholds, comma separated
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        /// Default NMS threshold d
        #[arg(long, default_value_t = 0.5)]
        default: f64,
        /// penalty | paper
        #[arg(long, default_value = "penalty")]
        mode: String,
        /// Penalty strength (penalty mode)
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// IoU threshold for the AP evaluations inside the search
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long)]
        oi_order: bool,
        /// Threshold table output (LabelName,Threshold)
        #[arg(long)]
        out: PathBuf,
    },

    /// Constrained grid search for a base scale triple, optional compound
    /// scaling into an architecture plan
    ScaleSearch {
        /// Grid spec JSON: {"depth":[..],"width":[..],"resolution":[..],"target":2.0,"tol":0.05}
        #[arg(long)]
        grid_spec: PathBuf,
        /// builtin:<separable-concave|rosenbrock|noisy-plateau> or exec:<command>
        #[arg(long)]
        oracle: String,
        /// Full scan CSV output
        #[arg(long)]
        scan_out: Option<PathBuf>,
        /// Base architecture plan JSON to scale with the winning triple
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Scaled plan JSON output
        #[arg(long)]
        plan_out: Option<PathBuf>,
        /// Compound-scaling exponent applied to the winning triple
        #[arg(long, default_value_t = 1.0)]
        phi: f64,
        /// Pin the plan's resolution coefficient to 1
        #[arg(long)]
        fix_resolution: bool,
        /// Extra blocks for stage four of the plan
        #[arg(long, default_value_t = 0)]
        stage4_extra: u32,
    },

    /// Apply an augmentation policy to a PPM image and its boxes
    Augment {
        /// Input image (binary PPM, maxval 255)
        #[arg(long)]
        image: PathBuf,
        /// Input boxes CSV (XMin,YMin,XMax,YMax)
        #[arg(long)]
        boxes: PathBuf,
        /// Policy JSON; the bundled five-sub-policy table when omitted
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        image_out: PathBuf,
        #[arg(long)]
        boxes_out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<(), PipelineError> {
    let globals = commands::Globals {
        seed: cli.seed,
        jobs: cli.jobs,
        hierarchy: cli.hierarchy,
    };
    if globals.jobs == 0 {
        return Err(PipelineError::usage("--jobs must be at least 1"));
    }
    match cli.command {
        Command::Evaluate {
            detections,
            ground_truth,
            iou,
            oi_order,
            ap_out,
        } => commands::evaluate::run(&globals, &detections, &ground_truth, iou, oi_order, &ap_out),
        Command::Expand {
            detections,
            ground_truth,
            mode,
            oi_order,
            out,
        } => commands::expand::run(&globals, detections, ground_truth, &mode, oi_order, &out),
        Command::Sample {
            ground_truth,
            draws,
            oi_order,
            draws_out,
            histogram_out,
        } => commands::sample::run(
            &globals,
            &ground_truth,
            draws,
            oi_order,
            &draws_out,
            &histogram_out,
        ),
        Command::LossCheck {
            logits,
            targets,
            epsilon,
        } => commands::loss_check::run(&logits, &targets, epsilon),
        Command::Ensemble {
            manifest,
            thresholds,
            default_threshold,
            oi_order,
            out,
        } => commands::ensemble::run(&manifest, thresholds, default_threshold, oi_order, &out),
        Command::NmsSearch {
            detections,
            ground_truth,
            grid,
            default,
            mode,
            lambda,
            iou,
            oi_order,
            out,
        } => commands::nms_search::run(
            &globals,
            &detections,
            &ground_truth,
            &grid,
            default,
            &mode,
            lambda,
            iou,
            oi_order,
            &out,
        ),
        Command::ScaleSearch {
            grid_spec,
            oracle,
            scan_out,
            plan,
            plan_out,
            phi,
            fix_resolution,
            stage4_extra,
        } => commands::scale_search::run(
            &grid_spec,
            &oracle,
            scan_out,
            plan,
            plan_out,
            phi,
            fix_resolution,
            stage4_extra,
        ),
        Command::Augment {
            image,
            boxes,
            policy,
            image_out,
            boxes_out,
        } => commands::augment::run(&globals, &image, &boxes, policy, &image_out, &boxes_out),
    }
}
