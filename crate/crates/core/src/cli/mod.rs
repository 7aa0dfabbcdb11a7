//! Experiment drivers, configuration and file formats. This is the only
//! part of the crate that touches the filesystem.

pub mod commands;
pub mod config;
pub mod formats;
pub mod full;
pub mod lw;

pub use commands::{eval, gen_3d, gen_lw, ingest, run_3d, run_lw, IngestInput, Manifest};
pub use config::{RunConfig, FULL_SCALE_DETECTORS};
