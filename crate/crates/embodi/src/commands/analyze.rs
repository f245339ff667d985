//! `analyze`: similarity curves and PCA of encoder features.

use std::path::{Path, PathBuf};

use embodi_core::analysis::{cosine, pca_project, three_curve_protocol, CurveEncoders, SimilarityCurves};
use embodi_core::toy::{GlobalEncoder, GrayImage, ToyEncoder};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{load_config, write_csv, Status};
use crate::dataset::{load_dataset, Dataset};
use crate::encoder_file;
use crate::error::{create_dir, write_file, Error, Result};

pub const SUMMARY_FILE: &str = "summary.json";
pub const CURVES_FILE: &str = "curves.csv";
pub const PCA_FILE: &str = "pca.csv";
pub const PLOT_FILE: &str = "plot.json";

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    /// Directory holding `E_H.enc`, `E_P.enc` and optionally `E_R.enc`.
    pub input: PathBuf,
    /// Defaults to `<input>/heldout`.
    pub dataset: Option<PathBuf>,
    pub output: PathBuf,
    pub config: Option<PathBuf>,
}

/// The three encoders of a transitive run. The unaligned baseline is `human`,
/// which is the shared initialization of all three.
#[derive(Debug, Clone)]
pub struct EncoderSet {
    pub human: ToyEncoder,
    pub pseudo: ToyEncoder,
    pub robot: Option<ToyEncoder>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub frame: usize,
    pub in_sequence_mean: f64,
    pub in_sequence_std: f64,
    pub cross_domain_aligned_mean: f64,
    pub cross_domain_aligned_std: f64,
    pub cross_domain_unaligned_mean: f64,
    pub cross_domain_unaligned_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeforeAfter {
    /// Both frames through the initial encoder.
    pub before: f64,
    /// Each frame through its domain's trained encoder.
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSummary {
    pub sequences: usize,
    pub curves: Vec<CurveRow>,
    /// Mean paired cosine between human and pseudo-robot frames.
    pub human_pseudo: BeforeAfter,
    /// Mean paired cosine between human and real-robot frames.
    pub human_real: Option<BeforeAfter>,
    /// Aligned curve above the unaligned one at every frame, and closer to
    /// the in-sequence curve.
    pub ordering_holds: bool,
}

pub fn curve_rows(c: &SimilarityCurves) -> Vec<CurveRow> {
    (0..c.len())
        .map(|t| CurveRow {
            frame: t,
            in_sequence_mean: c.in_sequence.mean[t],
            in_sequence_std: c.in_sequence.std[t],
            cross_domain_aligned_mean: c.cross_domain_aligned.mean[t],
            cross_domain_aligned_std: c.cross_domain_aligned.std[t],
            cross_domain_unaligned_mean: c.cross_domain_unaligned.mean[t],
            cross_domain_unaligned_std: c.cross_domain_unaligned.std[t],
        })
        .collect()
}

pub fn ordering_holds(rows: &[CurveRow]) -> bool {
    !rows.is_empty()
        && rows.iter().all(|r| {
            r.cross_domain_aligned_mean > r.cross_domain_unaligned_mean
                && (r.in_sequence_mean - r.cross_domain_aligned_mean).abs()
                    < (r.in_sequence_mean - r.cross_domain_unaligned_mean).abs()
        })
}

type Sequences = Vec<Vec<(GrayImage, GrayImage, Option<GrayImage>)>>;

fn mean_paired_cosine(a: &ToyEncoder, b: &ToyEncoder, pairs: &[(&GrayImage, &GrayImage)]) -> Result<f64> {
    let mut sum = 0.0;
    for (x, y) in pairs {
        sum += cosine(&a.encode_global(&x.to_input())?, &b.encode_global(&y.to_input())?)?;
    }
    Ok(sum / pairs.len() as f64)
}

fn check_dims(enc: &EncoderSet, image_size: Option<usize>) -> Result<()> {
    let mut all = vec![("E_H", &enc.human), ("E_P", &enc.pseudo)];
    if let Some(r) = &enc.robot {
        all.push(("E_R", r));
    }
    let d = enc.human.feature_dim();
    for (name, e) in &all {
        if e.feature_dim() != d {
            return Err(Error::Run(format!(
                "{name} has feature dimension {}, E_H has {d}",
                e.feature_dim()
            )));
        }
        if let Some(size) = image_size {
            if e.input_size() != size {
                return Err(Error::Run(format!(
                    "{name} expects {0}x{0} frames, dataset frames are {size}x{size}",
                    e.input_size()
                )));
            }
        }
    }
    Ok(())
}

pub fn summarize(enc: &EncoderSet, seqs: &Sequences) -> Result<AlignmentSummary> {
    let humans: Vec<Vec<GrayImage>> = seqs.iter().map(|s| s.iter().map(|f| f.0.clone()).collect()).collect();
    let pseudos: Vec<Vec<GrayImage>> = seqs.iter().map(|s| s.iter().map(|f| f.1.clone()).collect()).collect();
    let curves = three_curve_protocol(
        &humans,
        &pseudos,
        &CurveEncoders {
            aligned_human: &enc.human,
            aligned_pseudo: &enc.pseudo,
            unaligned: &enc.human,
        },
    )?;
    let rows = curve_rows(&curves);
    let hp: Vec<(&GrayImage, &GrayImage)> = seqs.iter().flatten().map(|f| (&f.0, &f.1)).collect();
    let human_pseudo = BeforeAfter {
        before: mean_paired_cosine(&enc.human, &enc.human, &hp)?,
        after: mean_paired_cosine(&enc.human, &enc.pseudo, &hp)?,
    };
    let hr: Vec<(&GrayImage, &GrayImage)> = seqs
        .iter()
        .flatten()
        .filter_map(|f| f.2.as_ref().map(|r| (&f.0, r)))
        .collect();
    let human_real = match (&enc.robot, hr.len() == hp.len()) {
        (Some(robot), true) => Some(BeforeAfter {
            before: mean_paired_cosine(&enc.human, &enc.human, &hr)?,
            after: mean_paired_cosine(&enc.human, robot, &hr)?,
        }),
        _ => None,
    };
    Ok(AlignmentSummary {
        sequences: seqs.len(),
        ordering_holds: ordering_holds(&rows),
        curves: rows,
        human_pseudo,
        human_real,
    })
}

pub fn summarize_dataset(enc: &EncoderSet, data: &Dataset) -> Result<AlignmentSummary> {
    check_dims(enc, data.image_size())?;
    let seqs = data.analysis_sequences();
    if seqs.is_empty() {
        return Err(Error::Run("dataset has no frames to analyze".into()));
    }
    summarize(enc, &seqs)
}

pub fn write_summary(dir: &Path, s: &AlignmentSummary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(s).map_err(|e| Error::Run(e.to_string()))?;
    text.push('\n');
    write_file(&dir.join(SUMMARY_FILE), text)
}

pub fn load_encoders(dir: &Path) -> Result<EncoderSet> {
    let load = |name: &str| encoder_file::load(&dir.join(name)).map(|f| f.encoder);
    let robot_path = dir.join("E_R.enc");
    Ok(EncoderSet {
        human: load("E_H.enc")?,
        pseudo: load("E_P.enc")?,
        robot: if robot_path.exists() { Some(load("E_R.enc")?) } else { None },
    })
}

struct PcaRow {
    domain: &'static str,
    sequence: usize,
    frame: usize,
    coords: Vec<f64>,
}

fn write_pca_csv(path: &Path, k: usize, rows: &[PcaRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    let mut header = vec!["domain".to_string(), "sequence".into(), "frame".into()];
    header.extend((1..=k).map(|c| format!("pc{c}")));
    w.write_record(&header).map_err(|e| Error::format(path, e))?;
    for r in rows {
        let mut rec = vec![r.domain.to_string(), r.sequence.to_string(), r.frame.to_string()];
        rec.extend(r.coords.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn pca_rows(enc: &EncoderSet, seqs: &Sequences, k: usize) -> Result<(Vec<PcaRow>, Vec<f64>)> {
    let mut feats = Vec::new();
    let mut meta = Vec::new();
    for (si, seq) in seqs.iter().enumerate() {
        for (fi, (h, p, r)) in seq.iter().enumerate() {
            feats.push(enc.human.encode_global(&h.to_input())?);
            meta.push(("human", si, fi));
            feats.push(enc.pseudo.encode_global(&p.to_input())?);
            meta.push(("pseudo", si, fi));
            if let (Some(robot), Some(r)) = (&enc.robot, r) {
                feats.push(robot.encode_global(&r.to_input())?);
                meta.push(("real", si, fi));
            }
        }
    }
    let d = enc.human.feature_dim();
    let m = DMatrix::from_fn(feats.len(), d, |i, j| feats[i][j]);
    let proj = pca_project(&m, k)?;
    let rows = meta
        .into_iter()
        .enumerate()
        .map(|(i, (domain, sequence, frame))| PcaRow {
            domain,
            sequence,
            frame,
            coords: (0..k).map(|c| proj.coords[(i, c)]).collect(),
        })
        .collect();
    Ok((rows, proj.explained_variance_ratio))
}

fn plot_description(k: usize, ratios: &[f64]) -> serde_json::Value {
    serde_json::json!({
        "similarity": {
            "file": CURVES_FILE,
            "x": { "column": "frame", "label": "frame index t" },
            "y": { "label": "cosine similarity to the first frame" },
            "series": [
                { "mean": "in_sequence_mean", "std": "in_sequence_std", "label": "in-sequence: E_P(P_1) vs E_P(P_t)", "color": "blue" },
                { "mean": "cross_domain_aligned_mean", "std": "cross_domain_aligned_std", "label": "cross-domain aligned: E_H(H_1) vs E_P(P_t)", "color": "green" },
                { "mean": "cross_domain_unaligned_mean", "std": "cross_domain_unaligned_std", "label": "cross-domain unaligned: E_0(H_1) vs E_0(P_t)", "color": "purple" }
            ]
        },
        "pca": {
            "file": PCA_FILE,
            "components": (1..=k).map(|c| format!("pc{c}")).collect::<Vec<_>>(),
            "group_by": "domain",
            "explained_variance_ratio": ratios,
        }
    })
}

pub fn analyze(opts: &AnalyzeOptions) -> Result<Status> {
    let (cfg, _) = load_config(opts.config.as_deref())?;
    let enc = load_encoders(&opts.input)?;
    let data_dir = opts.dataset.clone().unwrap_or_else(|| opts.input.join("heldout"));
    let data = load_dataset(&data_dir)?;
    let summary = summarize_dataset(&enc, &data)?;
    let seqs = data.analysis_sequences();
    let (pca, ratios) = pca_rows(&enc, &seqs, cfg.analysis.pca_components)?;

    create_dir(&opts.output)?;
    write_csv(&opts.output.join(CURVES_FILE), &summary.curves)?;
    write_pca_csv(&opts.output.join(PCA_FILE), cfg.analysis.pca_components, &pca)?;
    let mut plot = serde_json::to_string_pretty(&plot_description(cfg.analysis.pca_components, &ratios))
        .map_err(|e| Error::Run(e.to_string()))?;
    plot.push('\n');
    write_file(&opts.output.join(PLOT_FILE), plot)?;
    write_summary(&opts.output, &summary)?;
    println!(
        "{} sequences, {} frames; ordering {}",
        summary.sequences,
        summary.curves.len(),
        if summary.ordering_holds { "holds" } else { "does not hold" }
    );
    Ok(Status::Success)
}
