use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{write_file, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub index: usize,
    /// `converted` or `failed: <reason>`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FrameEntry {
    pub fn converted(index: usize, output: String, warnings: Vec<String>) -> Self {
        Self {
            index,
            status: "converted".into(),
            output: Some(output),
            warnings,
        }
    }

    pub fn failed(index: usize, reason: &str) -> Self {
        Self {
            index,
            status: format!("failed: {reason}"),
            output: None,
            warnings: Vec::new(),
        }
    }

    pub fn is_converted(&self) -> bool {
        self.status == "converted"
    }
}

/// Record of one command run. Holds no timestamps or output path, so identical
/// runs produce identical bytes wherever they write.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: Option<String>,
    pub input: Option<String>,
    pub seed: u64,
    pub converted: usize,
    pub failed: usize,
    pub frames: Vec<FrameEntry>,
}

impl RunManifest {
    pub fn new(command: &str, config: Option<&Path>, input: Option<&Path>, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.map(|p| p.display().to_string()),
            input: input.map(|p| p.display().to_string()),
            seed,
            converted: 0,
            failed: 0,
            frames: Vec::new(),
        }
    }

    pub fn push(&mut self, entry: FrameEntry) {
        if entry.is_converted() {
            self.converted += 1;
        } else {
            self.failed += 1;
        }
        self.frames.push(entry);
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Run(e.to_string()))?;
        text.push('\n');
        write_file(&dir.join(MANIFEST_FILE), text)
    }
}
