//! File formats, configuration and commands for the `embodi` tool. The math
//! lives in `embodi-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod encoder_file;
pub mod error;
pub mod manifest;
pub mod occupancy_file;
pub mod ply;
pub mod raster;
pub mod records;
pub mod urdf;

pub use error::{Error, Result};
