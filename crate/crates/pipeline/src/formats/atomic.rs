//! Atomic file writes: content lands in a temp file next to the target and
//! is renamed into place, so a failing command never leaves partial output.

use std::io::Write;
use std::path::Path;

use crate::error::PipelineError;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::Builder::new()
        .prefix(".detkit-")
        .tempfile_in(dir)
        .map_err(|e| {
            PipelineError::data(format!("cannot create temp file in {}: {e}", dir.display()))
        })?;
    tmp.write_all(bytes)
        .map_err(|e| PipelineError::data(format!("cannot write {}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| PipelineError::data(format!("cannot persist {}: {e}", path.display())))?;
    Ok(())
}
