//! Two-stage frozen-teacher distillation on paired synthetic frames.
//!
//! Stage 1 aligns a pseudo-robot student to a frozen human teacher, with
//! local views cropped around the interaction point. Stage 2 aligns a
//! real-robot student to the frozen stage-1 student using unconstrained
//! multi-crop views. Both students start from their teacher's weights.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::encoder::{EncoderDims, EncoderOutput, ToyEncoder};
use super::synth::PairedFrame;
use crate::distill::{
    block_mask, random_crop, roint_crop_with, total_loss, update_center, CropRect, DistillBatch,
    DistillConfig, FeatureVector, PrototypeHead, StudentView,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Human teacher, pseudo-robot student.
    One,
    /// Pseudo-robot teacher, real-robot student.
    Two,
}

impl Stage {
    pub fn from_index(i: u32) -> Result<Self> {
        match i {
            1 => Ok(Stage::One),
            2 => Ok(Stage::Two),
            other => Err(Error::config("stage", format!("must be 1 or 2, got {other}"))),
        }
    }

    pub fn index(self) -> u32 {
        match self {
            Stage::One => 1,
            Stage::Two => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Local student views per sample per step.
    pub local_views: usize,
    /// Local crop side as a fraction of the short image side.
    pub local_scale: (f64, f64),
    /// Probability that a local view is an interaction-centered crop.
    pub roint_probability: f64,
}

impl StageConfig {
    pub fn stage1() -> Self {
        Self {
            steps: 500,
            batch_size: 64,
            learning_rate: 1e-2,
            local_views: 2,
            local_scale: (0.35, 0.6),
            roint_probability: 1.0,
        }
    }

    pub fn stage2() -> Self {
        Self {
            roint_probability: 0.0,
            ..Self::stage1()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::config("batch_size", "must be at least 2"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config("learning_rate", "must be >= 0"));
        }
        let (lo, hi) = self.local_scale;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::config("local_scale", "must satisfy 0 < lo <= hi <= 1"));
        }
        if !(0.0..=1.0).contains(&self.roint_probability) {
            return Err(Error::config("roint_probability", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub step: usize,
    pub dino: f64,
    pub ibot: f64,
    pub koleo: f64,
    pub total: f64,
}

/// Local view actually used during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropRecord {
    pub step: usize,
    pub pair: usize,
    pub rect: CropRect,
    /// Pixel the crop was centered on before in-bounds shifting.
    pub center: (usize, usize),
    pub roint: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub stage: Stage,
    pub seed: u64,
    pub steps: Vec<StepLosses>,
    pub crops: Vec<CropRecord>,
    pub initial_params: Vec<f64>,
    pub final_params: Vec<f64>,
}

/// Runs gradient descent on the student against a frozen teacher.
#[allow(clippy::too_many_arguments)]
pub fn distill_stage(
    teacher: &ToyEncoder,
    student: &ToyEncoder,
    head: &PrototypeHead,
    pairs: &[PairedFrame],
    distill: &DistillConfig,
    cfg: &StageConfig,
    stage: Stage,
    seed: u64,
) -> Result<TrainTrace> {
    distill.validate()?;
    cfg.validate()?;
    let dims = student.dims();
    if teacher.dims() != dims {
        return Err(Error::Shape("teacher and student dimensions differ".into()));
    }
    if head.dim() != dims.feature {
        return Err(Error::Shape(format!(
            "head expects {}-d features, encoder produces {}",
            head.dim(),
            dims.feature
        )));
    }
    if pairs.is_empty() {
        return Err(Error::Validation("no training pairs".into()));
    }
    let size = dims.image;
    for p in pairs {
        if p.first.width() != size || p.first.height() != size || p.second.width() != size || p.second.height() != size {
            return Err(Error::Shape(format!(
                "pair ({}, {}) is not {size}x{size}",
                p.sequence, p.frame
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut head = head.clone();
    let mut student = student.clone();
    let initial_params = student.params().to_vec();

    let teacher_out: Vec<EncoderOutput> = pairs
        .iter()
        .map(|p| teacher.forward(&p.first.to_input(), None).map(|(o, _)| o))
        .collect::<Result<_>>()?;
    let student_inputs: Vec<Vec<f64>> = pairs.iter().map(|p| p.second.to_input()).collect();

    let batch_size = cfg.batch_size.min(pairs.len().max(2));
    let n_patches = dims.patches();
    let d = dims.feature;
    let mut steps = Vec::with_capacity(cfg.steps);
    let mut crops = Vec::new();

    for step in 0..cfg.steps {
        let chosen: Vec<usize> = if pairs.len() >= batch_size {
            sample(&mut rng, pairs.len(), batch_size).into_vec()
        } else {
            (0..batch_size).map(|_| rng.random_range(0..pairs.len())).collect()
        };

        let mut teacher_global = Vec::with_capacity(batch_size);
        let mut views = Vec::new();
        let mut view_caches = Vec::new();
        let mut masked_caches = Vec::with_capacity(batch_size);
        let mut teacher_patches = DMatrix::zeros(batch_size * n_patches, d);
        let mut student_patches = DMatrix::zeros(batch_size * n_patches, d);
        let mut patch_mask = Vec::with_capacity(batch_size * n_patches);
        let mut embeddings = DMatrix::zeros(batch_size, d);

        for (b, &i) in chosen.iter().enumerate() {
            let t = &teacher_out[i];
            teacher_global.push(FeatureVector::new(t.global.clone())?);
            teacher_patches
                .rows_mut(b * n_patches, n_patches)
                .copy_from(&t.patches);

            let (out, cache) = student.forward(&student_inputs[i], None)?;
            embeddings.set_row(b, &out.global.transpose());
            views.push(StudentView {
                features: FeatureVector::new(out.global)?,
                is_local_crop: false,
                target: b,
            });
            view_caches.push(cache);

            let mask = block_mask((dims.grid(), dims.grid()), distill.mask_ratio, &mut rng)?;
            let (masked, mcache) = student.forward(&student_inputs[i], Some(&mask))?;
            student_patches
                .rows_mut(b * n_patches, n_patches)
                .copy_from(&masked.patches);
            patch_mask.extend_from_slice(&mask);
            masked_caches.push(mcache);

            for _ in 0..cfg.local_views {
                let use_roint = rng.random::<f64>() < cfg.roint_probability;
                let (rect, center) = if use_roint {
                    let c = pairs[i].interaction_center;
                    (roint_crop_with((size, size), c, cfg.local_scale, &mut rng)?, c)
                } else {
                    random_crop((size, size), cfg.local_scale, &mut rng)?
                };
                crops.push(CropRecord {
                    step,
                    pair: i,
                    rect,
                    center,
                    roint: use_roint,
                });
                let input = pairs[i].second.crop_to_input(&rect, size);
                let (out, cache) = student.forward(&input, None)?;
                views.push(StudentView {
                    features: FeatureVector::new(out.global)?,
                    is_local_crop: true,
                    target: b,
                });
                view_caches.push(cache);
            }
        }

        let batch = DistillBatch {
            teacher_global,
            student_views: views,
            teacher_patches,
            student_patch_preds: student_patches,
            patch_mask,
            student_batch_embeddings: embeddings,
        };
        let loss = total_loss(&batch, &head, distill)?;

        let mut grad = alloc::vec![0.0; student.params().len()];
        let mut global_idx = 0;
        for (v, (view, cache)) in batch.student_views.iter().zip(&view_caches).enumerate() {
            let mut g = loss.grad_student_views[v].clone();
            if !view.is_local_crop {
                g += loss.grad_batch_embeddings.row(global_idx).transpose();
                global_idx += 1;
            }
            student.backward(cache, &g, None, &mut grad)?;
        }
        let zero = DVector::zeros(d);
        for (b, cache) in masked_caches.iter().enumerate() {
            let gz = loss.grad_patch_preds.rows(b * n_patches, n_patches).into_owned();
            student.backward(cache, &zero, Some(&gz), &mut grad)?;
        }
        for (p, g) in student.params_mut().iter_mut().zip(&grad) {
            *p -= cfg.learning_rate * g;
        }

        let mut logits = DMatrix::zeros(batch_size, head.prototypes());
        for (b, t) in batch.teacher_global.iter().enumerate() {
            logits.set_row(b, &head.logits(t)?.transpose());
        }
        update_center(&mut head, &logits)?;

        steps.push(StepLosses {
            step,
            dino: loss.dino,
            ibot: loss.ibot,
            koleo: loss.koleo,
            total: loss.total,
        });
    }

    Ok(TrainTrace {
        stage,
        seed,
        steps,
        crops,
        initial_params,
        final_params: student.params().to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitiveConfig {
    pub dims: EncoderDims,
    pub distill: DistillConfig,
    pub stage1: StageConfig,
    pub stage2: StageConfig,
}

impl Default for TransitiveConfig {
    fn default() -> Self {
        Self {
            dims: EncoderDims::default(),
            distill: DistillConfig::default(),
            stage1: StageConfig::stage1(),
            stage2: StageConfig::stage2(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitiveSeeds {
    /// Shared initialization of every encoder.
    pub init: u64,
    pub head: u64,
    pub stage1: u64,
    pub stage2: u64,
}

impl TransitiveSeeds {
    pub fn from_base(seed: u64) -> Self {
        Self {
            init: seed,
            head: seed.wrapping_add(1),
            stage1: seed.wrapping_add(2),
            stage2: seed.wrapping_add(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitiveOutcome {
    /// Human encoder: the untouched stage-1 teacher.
    pub human: ToyEncoder,
    /// Pseudo-robot encoder: stage-1 student, stage-2 teacher.
    pub pseudo: ToyEncoder,
    /// Real-robot encoder: stage-2 student.
    pub robot: ToyEncoder,
    pub head: PrototypeHead,
    pub stage1: TrainTrace,
    pub stage2: TrainTrace,
}

/// Stage 1 then stage 2 with the initialization chain
/// `E_P ← E_H` and `E_R ← E_P(stage 1 result)`.
pub fn run_transitive(
    pairs1: &[PairedFrame],
    pairs2: &[PairedFrame],
    cfg: &TransitiveConfig,
    seeds: TransitiveSeeds,
) -> Result<TransitiveOutcome> {
    if pairs1.is_empty() || pairs2.is_empty() {
        return Err(Error::Validation("both stages need training pairs".into()));
    }
    cfg.distill.validate()?;
    let mut human = ToyEncoder::init(cfg.dims, seeds.init)?;
    let teacher_inputs: Vec<Vec<f64>> = pairs1.iter().map(|p| p.first.to_input()).collect();
    human.center_outputs(&teacher_inputs)?;
    let head = PrototypeHead::random(
        cfg.distill.prototypes,
        cfg.dims.feature,
        cfg.distill.center_momentum,
        seeds.head,
    )?;

    let stage1 = distill_stage(
        &human,
        &human.clone(),
        &head,
        pairs1,
        &cfg.distill,
        &cfg.stage1,
        Stage::One,
        seeds.stage1,
    )?;
    let pseudo = ToyEncoder::from_params(cfg.dims, stage1.final_params.clone())?;

    let stage2 = distill_stage(
        &pseudo,
        &pseudo.clone(),
        &head,
        pairs2,
        &cfg.distill,
        &cfg.stage2,
        Stage::Two,
        seeds.stage2,
    )?;
    let robot = ToyEncoder::from_params(cfg.dims, stage2.final_params.clone())?;

    Ok(TransitiveOutcome {
        human,
        pseudo,
        robot,
        head,
        stage1,
        stage2,
    })
}
