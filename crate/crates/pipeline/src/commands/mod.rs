//! Subcommand implementations. Each is a pure function of its input files,
//! flags, and (where relevant) the seed: running one twice produces
//! byte-identical artifacts.

use std::path::{Path, PathBuf};

use detkit_core::labelspace::LabelHierarchy;

use crate::error::PipelineError;
use crate::formats::json_docs;

pub mod augment;
pub mod ensemble;
pub mod evaluate;
pub mod expand;
pub mod loss_check;
pub mod nms_search;
pub mod sample;
pub mod scale_search;

/// Global flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Globals {
    pub seed: u64,
    pub jobs: usize,
    pub hierarchy: Option<PathBuf>,
}

impl Globals {
    /// Loads the hierarchy document, failing with a usage error when the
    /// flag is missing.
    pub fn require_hierarchy(&self, command: &str) -> Result<LabelHierarchy, PipelineError> {
        let path: &Path = self
            .hierarchy
            .as_deref()
            .ok_or_else(|| PipelineError::usage(format!("{command} requires --hierarchy")))?;
        json_docs::load_hierarchy(path)
    }
}
