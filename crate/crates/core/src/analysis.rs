//! Feature-alignment analysis: first-frame anchored cosine similarity curves
//! and PCA projection.

#[allow(unused_imports)] // inherent float methods exist only with std
use num_traits::Float;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::toy::{GlobalEncoder, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Human,
    Pseudo,
    Real,
}

impl Domain {
    pub fn tag(self) -> &'static str {
        match self {
            Domain::Human => "human",
            Domain::Pseudo => "pseudo",
            Domain::Real => "real",
        }
    }
}

/// Per-frame global features of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub id: usize,
    pub domain: Domain,
    frames: Vec<DVector<f64>>,
}

impl FeatureSequence {
    pub fn new(id: usize, domain: Domain, frames: Vec<DVector<f64>>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::Validation(format!("feature sequence {id} is empty")));
        };
        let dim = first.len();
        if frames.iter().any(|f| f.len() != dim) {
            return Err(Error::Shape(format!("sequence {id} mixes feature dimensions")));
        }
        Ok(Self { id, domain, frames })
    }

    pub fn frames(&self) -> &[DVector<f64>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.frames[0].len()
    }
}

pub fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("cosine of {}-d and {}-d vectors", a.len(), b.len())));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("cosine similarity with a zero vector".into()));
    }
    Ok((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

/// `cos(reference, seq[t])` for every frame, including the first.
pub fn anchored_similarity(reference: &DVector<f64>, seq: &FeatureSequence) -> Result<Vec<f64>> {
    seq.frames.iter().map(|f| cosine(reference, f)).collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurveStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Three per-frame similarity curves aggregated over sequences.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimilarityCurves {
    /// `E_P(I_P1)` vs `E_P(I_P1:t)`.
    pub in_sequence: CurveStats,
    /// `E_H(I_H1)` vs `E_P(I_P1:t)`, aligned encoders.
    pub cross_domain_aligned: CurveStats,
    /// Baseline encoder on both domains: `E_0(I_H1)` vs `E_0(I_P1:t)`.
    pub cross_domain_unaligned: CurveStats,
}

impl SimilarityCurves {
    pub fn len(&self) -> usize {
        self.in_sequence.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Encoders compared by the three-curve protocol.
#[derive(Debug, Clone, Copy)]
pub struct CurveEncoders<'a, E: GlobalEncoder> {
    pub aligned_human: &'a E,
    pub aligned_pseudo: &'a E,
    pub unaligned: &'a E,
}

fn aggregate(curves: &[Vec<f64>], len: usize) -> CurveStats {
    let n = curves.len() as f64;
    let mut stats = CurveStats::default();
    for t in 0..len {
        let mean = curves.iter().map(|c| c[t]).sum::<f64>() / n;
        let var = curves.iter().map(|c| (c[t] - mean).powi(2)).sum::<f64>() / n;
        stats.mean.push(mean);
        stats.std.push(var.sqrt());
    }
    stats
}

fn check_pairing<A, B>(human: &[Vec<A>], pseudo: &[Vec<B>]) -> Result<usize> {
    if human.is_empty() {
        return Err(Error::Validation("no sequences to analyze".into()));
    }
    if human.len() != pseudo.len() {
        return Err(Error::Validation(format!(
            "{} human sequences vs {} pseudo sequences",
            human.len(),
            pseudo.len()
        )));
    }
    let offenders: Vec<String> = human
        .iter()
        .zip(pseudo)
        .enumerate()
        .filter(|(_, (h, p))| h.len() != p.len() || h.is_empty())
        .map(|(i, (h, p))| format!("{i} ({} vs {})", h.len(), p.len()))
        .collect();
    if !offenders.is_empty() {
        return Err(Error::Validation(format!(
            "unpaired sequence lengths: {}",
            offenders.join(", ")
        )));
    }
    Ok(human.iter().map(Vec::len).min().unwrap_or(0))
}

/// Three-curve protocol on precomputed features.
///
/// Each element of the inputs is one sequence; `human_*` and `pseudo_*` must
/// be index-aligned. Curves are truncated to the shortest sequence.
pub fn three_curves_from_features(
    aligned_human: &[Vec<DVector<f64>>],
    aligned_pseudo: &[Vec<DVector<f64>>],
    unaligned_human: &[Vec<DVector<f64>>],
    unaligned_pseudo: &[Vec<DVector<f64>>],
) -> Result<SimilarityCurves> {
    let len = check_pairing(aligned_human, aligned_pseudo)?;
    check_pairing(unaligned_human, unaligned_pseudo)?;
    check_pairing(aligned_human, unaligned_pseudo)?;
    let curve = |anchor: &DVector<f64>, seq: &[DVector<f64>]| -> Result<Vec<f64>> {
        seq[..len].iter().map(|f| cosine(anchor, f)).collect()
    };
    let mut blue = Vec::new();
    let mut green = Vec::new();
    let mut purple = Vec::new();
    for i in 0..aligned_human.len() {
        blue.push(curve(&aligned_pseudo[i][0], &aligned_pseudo[i])?);
        green.push(curve(&aligned_human[i][0], &aligned_pseudo[i])?);
        purple.push(curve(&unaligned_human[i][0], &unaligned_pseudo[i])?);
    }
    Ok(SimilarityCurves {
        in_sequence: aggregate(&blue, len),
        cross_domain_aligned: aggregate(&green, len),
        cross_domain_unaligned: aggregate(&purple, len),
    })
}

fn encode_all<E: GlobalEncoder>(enc: &E, seqs: &[Vec<GrayImage>]) -> Result<Vec<Vec<DVector<f64>>>> {
    seqs.iter()
        .map(|seq| {
            seq.iter()
                .map(|img| {
                    if img.width() != enc.input_size() || img.height() != enc.input_size() {
                        return Err(Error::Shape(format!(
                            "encoder expects {0}x{0} frames, got {1}x{2}",
                            enc.input_size(),
                            img.width(),
                            img.height()
                        )));
                    }
                    enc.encode_global(&img.to_input())
                })
                .collect()
        })
        .collect()
}

/// Encodes paired raw frames and runs [`three_curves_from_features`].
pub fn three_curve_protocol<E: GlobalEncoder>(
    human_seqs: &[Vec<GrayImage>],
    pseudo_seqs: &[Vec<GrayImage>],
    encoders: &CurveEncoders<'_, E>,
) -> Result<SimilarityCurves> {
    check_pairing(human_seqs, pseudo_seqs)?;
    three_curves_from_features(
        &encode_all(encoders.aligned_human, human_seqs)?,
        &encode_all(encoders.aligned_pseudo, pseudo_seqs)?,
        &encode_all(encoders.unaligned, human_seqs)?,
        &encode_all(encoders.unaligned, pseudo_seqs)?,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    /// N×k coordinates.
    pub coords: DMatrix<f64>,
    /// Fraction of total variance per component, descending.
    pub explained_variance_ratio: Vec<f64>,
    /// k×D principal directions (rows).
    pub components: DMatrix<f64>,
    pub mean: DVector<f64>,
}

/// Mean-centered projection onto the top-`k` covariance eigenvectors. Each
/// component's largest-magnitude loading is made positive.
pub fn pca_project(features: &DMatrix<f64>, k: usize) -> Result<PcaProjection> {
    let (n, d) = features.shape();
    if n < 2 {
        return Err(Error::Validation(format!("PCA needs at least 2 samples, got {n}")));
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::Validation(format!(
            "k = {k} must lie in [1, min(N-1, D) = {}]",
            (n - 1).min(d)
        )));
    }
    let mean = features.row_mean().transpose();
    let mut centered = features.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();

    let mut components = DMatrix::zeros(k, d);
    let mut ratios = Vec::with_capacity(k);
    for (row, &idx) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(idx).into_owned();
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            v = -v;
        }
        components.set_row(row, &v.transpose());
        let lambda = eig.eigenvalues[idx].max(0.0);
        ratios.push(if total > 0.0 { lambda / total } else { 0.0 });
    }
    let coords = &centered * components.transpose();
    Ok(PcaProjection {
        coords,
        explained_variance_ratio: ratios,
        components,
        mean,
    })
}
