//! File formats: CSV tables, JSON documents, and binary PPM rasters. All
//! writers are atomic (temp file + rename) and canonical-ordered.

pub mod atomic;
pub mod csv_io;
pub mod json_docs;
pub mod ppm;
