//! `distill`: two-stage transitive distillation of toy encoders.

use std::path::PathBuf;

use embodi_core::toy::{
    run_transitive, synthesize_pairs, synthesize_triplets, CropRecord, TrainTrace, TransitiveSeeds,
};
use serde::Serialize;

use super::analyze::{summarize_dataset, write_summary, EncoderSet};
use super::{load_config, write_csv, Status};
use crate::dataset::{load_dataset, save_dataset, Dataset};
use crate::encoder_file::{self, EncoderFile};
use crate::error::{create_dir, Error, Result};
use crate::manifest::RunManifest;

/// Offset between the training and held-out world seeds.
pub const HELDOUT_SEED_OFFSET: u64 = 0x5eed_0000;

#[derive(Debug, Clone, Default)]
pub struct DistillOptions {
    pub output: PathBuf,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Training dataset; synthesized from the seed when absent.
    pub input: Option<PathBuf>,
}

#[derive(Serialize)]
struct TraceRow {
    step: usize,
    dino: f64,
    ibot: f64,
    koleo: f64,
    total: f64,
}

#[derive(Serialize)]
struct CropRow {
    step: usize,
    pair: usize,
    x: usize,
    y: usize,
    size: usize,
    center_u: usize,
    center_v: usize,
    roint: bool,
}

fn trace_rows(t: &TrainTrace) -> Vec<TraceRow> {
    t.steps
        .iter()
        .map(|s| TraceRow {
            step: s.step,
            dino: s.dino,
            ibot: s.ibot,
            koleo: s.koleo,
            total: s.total,
        })
        .collect()
}

fn crop_rows(crops: &[CropRecord]) -> Vec<CropRow> {
    crops
        .iter()
        .map(|c| CropRow {
            step: c.step,
            pair: c.pair,
            x: c.rect.x,
            y: c.rect.y,
            size: c.rect.size,
            center_u: c.center.0,
            center_v: c.center.1,
            roint: c.roint,
        })
        .collect()
}

pub fn distill(opts: &DistillOptions) -> Result<Status> {
    let (cfg, _) = load_config(opts.config.as_deref())?;
    let tc = cfg.transitive()?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let synth = cfg.data.synth();
    let frames = cfg.data.frames_per_sequence;

    let train = match &opts.input {
        Some(dir) => load_dataset(dir)?.pairs,
        None => synthesize_pairs(seed, cfg.data.train_sequences, frames, &synth)?,
    };
    if train.stage1.is_empty() || train.stage2.is_empty() {
        return Err(Error::Run("training dataset needs stage-1 and stage-2 pairs".into()));
    }
    let heldout = Dataset {
        pairs: Default::default(),
        triplets: synthesize_triplets(
            seed.wrapping_add(HELDOUT_SEED_OFFSET),
            cfg.data.heldout_sequences,
            frames,
            &synth,
        )?,
    };

    let out = run_transitive(&train.stage1, &train.stage2, &tc, TransitiveSeeds::from_base(seed))?;

    let dir = &opts.output;
    create_dir(dir)?;
    for (name, enc, provenance) in [
        ("E_H.enc", &out.human, "init"),
        ("E_P.enc", &out.pseudo, "stage1-student"),
        ("E_R.enc", &out.robot, "stage2-student"),
    ] {
        encoder_file::save(
            &dir.join(name),
            &EncoderFile {
                encoder: enc.clone(),
                seed,
                provenance: provenance.into(),
            },
        )?;
    }
    write_csv(&dir.join("stage1_trace.csv"), &trace_rows(&out.stage1))?;
    write_csv(&dir.join("stage2_trace.csv"), &trace_rows(&out.stage2))?;
    write_csv(&dir.join("stage1_crops.csv"), &crop_rows(&out.stage1.crops))?;
    write_csv(&dir.join("stage2_crops.csv"), &crop_rows(&out.stage2.crops))?;
    save_dataset(&dir.join("heldout"), &heldout)?;

    let encoders = EncoderSet {
        human: out.human.clone(),
        pseudo: out.pseudo.clone(),
        robot: Some(out.robot.clone()),
    };
    let summary = summarize_dataset(&encoders, &heldout)?;
    write_summary(dir, &summary)?;
    RunManifest::new("distill", opts.config.as_deref(), opts.input.as_deref(), seed).write(dir)?;

    println!(
        "held-out human/pseudo cosine {:.4} -> {:.4}; ordering {}",
        summary.human_pseudo.before,
        summary.human_pseudo.after,
        if summary.ordering_holds { "holds" } else { "does not hold" }
    );
    Ok(Status::Success)
}
