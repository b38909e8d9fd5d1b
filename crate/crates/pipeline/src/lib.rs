//! File formats, configuration, and the `detkit` CLI that composes the core
//! primitives into runnable commands.

pub mod cli;
pub mod commands;
pub mod error;
pub mod formats;
pub mod oracle;

pub use error::PipelineError;
