pub mod align;
pub mod analyze;
pub mod distill;
pub mod synth;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{create_dir, Error, Result};

/// Outcome of a command that did not hit a run-level error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Some frames failed; the rest were converted.
    Partial,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::Partial => 1,
        }
    }
}

/// Loads `path` (or the defaults) and returns it with the directory that
/// relative paths inside it resolve against.
pub(crate) fn load_config(path: Option<&Path>) -> Result<(PipelineConfig, PathBuf)> {
    match path {
        Some(p) => {
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok((PipelineConfig::load(p)?, base))
        }
        None => Ok((PipelineConfig::default(), PathBuf::new())),
    }
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        create_dir(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
