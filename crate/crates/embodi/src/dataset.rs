//! Toy image datasets on disk: PNG frames plus a `dataset.json` index.
//!
//! A dataset holds any of: stage-1 pairs `{I_H, I_P}`, stage-2 pairs
//! `{I_P', I_R}`, and evaluation triplets `{I_H, I_P, I_R}`.

use std::path::Path;

use embodi_core::toy::{GrayImage, PairedFrame, PairedFrameSet, TripletFrame};
use serde::{Deserialize, Serialize};

use crate::error::{read_string, write_file, Error, Result};
use crate::raster::{read_gray_png, write_gray_png};

pub const DATASET_INDEX: &str = "dataset.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairEntry {
    sequence: usize,
    frame: usize,
    first: String,
    second: String,
    interaction_center: [usize; 2],
    agent_bbox: [usize; 4],
    free_motion: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TripletEntry {
    sequence: usize,
    frame: usize,
    human: String,
    pseudo: String,
    real: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct DatasetIndex {
    image_size: usize,
    #[serde(default)]
    stage1: Vec<PairEntry>,
    #[serde(default)]
    stage2: Vec<PairEntry>,
    #[serde(default)]
    triplets: Vec<TripletEntry>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub pairs: PairedFrameSet,
    pub triplets: Vec<TripletFrame>,
}

impl Dataset {
    pub fn image_size(&self) -> Option<usize> {
        self.pairs
            .stage1
            .first()
            .map(|p| p.first.width())
            .or_else(|| self.pairs.stage2.first().map(|p| p.first.width()))
            .or_else(|| self.triplets.first().map(|t| t.human.width()))
    }

    /// Index-aligned `(human, pseudo, real)` sequences for analysis. Uses the
    /// triplets when present, otherwise the stage-1 pairs without a real frame.
    pub fn analysis_sequences(&self) -> Vec<Vec<(GrayImage, GrayImage, Option<GrayImage>)>> {
        let mut out: Vec<Vec<_>> = Vec::new();
        let mut put = |seq: usize, item| {
            if out.len() <= seq {
                out.resize_with(seq + 1, Vec::new);
            }
            out[seq].push(item);
        };
        if !self.triplets.is_empty() {
            for t in &self.triplets {
                put(t.sequence, (t.human.clone(), t.pseudo.clone(), Some(t.real.clone())));
            }
        } else {
            for p in &self.pairs.stage1 {
                put(p.sequence, (p.first.clone(), p.second.clone(), None));
            }
        }
        out.retain(|s| !s.is_empty());
        out
    }
}

fn frame_name(stage: &str, seq: usize, frame: usize, role: &str) -> String {
    format!("{stage}/s{seq:03}_f{frame:03}_{role}.png")
}

fn pair_entries(dir: &Path, stage: &str, pairs: &[PairedFrame]) -> Result<Vec<PairEntry>> {
    pairs
        .iter()
        .map(|p| {
            let first = frame_name(stage, p.sequence, p.frame, "first");
            let second = frame_name(stage, p.sequence, p.frame, "second");
            write_gray_png(&dir.join(&first), &p.first)?;
            write_gray_png(&dir.join(&second), &p.second)?;
            let b = p.agent_bbox;
            Ok(PairEntry {
                sequence: p.sequence,
                frame: p.frame,
                first,
                second,
                interaction_center: [p.interaction_center.0, p.interaction_center.1],
                agent_bbox: [b.0, b.1, b.2, b.3],
                free_motion: p.free_motion,
            })
        })
        .collect()
}

pub fn save_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    let mut index = DatasetIndex {
        image_size: data.image_size().unwrap_or(0),
        stage1: pair_entries(dir, "stage1", &data.pairs.stage1)?,
        stage2: pair_entries(dir, "stage2", &data.pairs.stage2)?,
        triplets: Vec::new(),
    };
    for t in &data.triplets {
        let e = TripletEntry {
            sequence: t.sequence,
            frame: t.frame,
            human: frame_name("eval", t.sequence, t.frame, "human"),
            pseudo: frame_name("eval", t.sequence, t.frame, "pseudo"),
            real: frame_name("eval", t.sequence, t.frame, "real"),
        };
        write_gray_png(&dir.join(&e.human), &t.human)?;
        write_gray_png(&dir.join(&e.pseudo), &t.pseudo)?;
        write_gray_png(&dir.join(&e.real), &t.real)?;
        index.triplets.push(e);
    }
    let mut text = serde_json::to_string_pretty(&index).map_err(|e| Error::Run(e.to_string()))?;
    text.push('\n');
    write_file(&dir.join(DATASET_INDEX), text)
}

fn load_image(dir: &Path, rel: &str, size: usize) -> Result<GrayImage> {
    let path = dir.join(rel);
    let img = read_gray_png(&path)?;
    if img.width() != size || img.height() != size {
        return Err(Error::format(
            &path,
            format!("frame is {}x{}, index declares {size}x{size}", img.width(), img.height()),
        ));
    }
    Ok(img)
}

fn load_pairs(dir: &Path, entries: &[PairEntry], size: usize) -> Result<Vec<PairedFrame>> {
    entries
        .iter()
        .map(|e| {
            let b = e.agent_bbox;
            Ok(PairedFrame {
                sequence: e.sequence,
                frame: e.frame,
                first: load_image(dir, &e.first, size)?,
                second: load_image(dir, &e.second, size)?,
                interaction_center: (e.interaction_center[0], e.interaction_center[1]),
                agent_bbox: (b[0], b[1], b[2], b[3]),
                free_motion: e.free_motion,
            })
        })
        .collect()
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let path = dir.join(DATASET_INDEX);
    let index: DatasetIndex =
        serde_json::from_str(&read_string(&path)?).map_err(|e| Error::format(&path, e))?;
    let size = index.image_size;
    let triplets = index
        .triplets
        .iter()
        .map(|e| {
            Ok(TripletFrame {
                sequence: e.sequence,
                frame: e.frame,
                human: load_image(dir, &e.human, size)?,
                pseudo: load_image(dir, &e.pseudo, size)?,
                real: load_image(dir, &e.real, size)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        pairs: PairedFrameSet {
            stage1: load_pairs(dir, &index.stage1, size)?,
            stage2: load_pairs(dir, &index.stage2, size)?,
        },
        triplets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use embodi_core::toy::{synthesize_pairs, synthesize_triplets, SynthConfig};

    #[test]
    fn round_trip() {
        let cfg = SynthConfig::default();
        let data = Dataset {
            pairs: synthesize_pairs(1, 2, 2, &cfg).unwrap(),
            triplets: synthesize_triplets(2, 1, 2, &cfg).unwrap(),
        };
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &data).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), data);
    }
}
