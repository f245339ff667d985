//! Self-distillation objective: DINO global-token loss, iBOT masked-patch loss
//! and the KoLeo nearest-neighbor entropy regularizer, with analytic gradients.
//!
//! `total = dino + ibot + lambda * koleo`. When a batch contains only
//! local-crop student views, the iBOT and KoLeo terms are disabled.

mod crop;
mod losses;

pub use crop::{block_mask, random_crop, roint_crop, roint_crop_with, CropRect};
pub use losses::{
    dino_loss, dino_loss_logits, ibot_loss, ibot_loss_logits, koleo_loss, log_softmax, softmax,
    total_loss, update_center, DistillBatch, LogitLoss, PatchLoss, StudentView, TotalLoss,
};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Weight of the KoLeo term in the total objective.
pub const KOLEO_WEIGHT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct DistillConfig {
    pub lambda: f64,
    pub teacher_temp: f64,
    pub student_temp: f64,
    pub prototypes: usize,
    pub mask_ratio: f64,
    pub koleo_epsilon: f64,
    pub center_momentum: f64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            lambda: KOLEO_WEIGHT,
            teacher_temp: 0.04,
            student_temp: 0.1,
            prototypes: 256,
            mask_ratio: 0.3,
            koleo_epsilon: 1e-8,
            center_momentum: 0.9,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.teacher_temp.is_finite() && self.teacher_temp > 0.0) {
            return Err(Error::config("teacher_temp", "must be > 0"));
        }
        if !(self.student_temp.is_finite() && self.student_temp > 0.0) {
            return Err(Error::config("student_temp", "must be > 0"));
        }
        if !(self.mask_ratio > 0.0 && self.mask_ratio < 1.0) {
            return Err(Error::config("mask_ratio", "must lie in (0, 1)"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config("lambda", "must be >= 0"));
        }
        if !(self.koleo_epsilon.is_finite() && self.koleo_epsilon > 0.0) {
            return Err(Error::config("koleo_epsilon", "must be > 0"));
        }
        if self.prototypes == 0 {
            return Err(Error::config("prototypes", "must be positive"));
        }
        if !(self.center_momentum >= 0.0 && self.center_momentum <= 1.0) {
            return Err(Error::config("center_momentum", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Finite D-dimensional embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(DVector<f64>);

impl FeatureVector {
    pub fn new(v: DVector<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("feature vector has non-finite entries".into()));
        }
        Ok(Self(v))
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }
}

impl core::ops::Deref for FeatureVector {
    type Target = DVector<f64>;
    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Prototype projection shared by teacher and student, plus the teacher
/// centering state.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeHead {
    /// K×D prototype matrix; logits are `weights · feature`.
    pub weights: DMatrix<f64>,
    pub center: DVector<f64>,
    pub center_momentum: f64,
}

impl PrototypeHead {
    pub fn new(weights: DMatrix<f64>, center_momentum: f64) -> Result<Self> {
        if weights.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("prototype weights must be finite".into()));
        }
        if !(0.0..=1.0).contains(&center_momentum) {
            return Err(Error::config("center_momentum", "must lie in [0, 1]"));
        }
        let k = weights.nrows();
        Ok(Self {
            weights,
            center: DVector::zeros(k),
            center_momentum,
        })
    }

    /// Random unit-norm prototypes.
    pub fn random(prototypes: usize, dim: usize, center_momentum: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = DMatrix::from_fn(prototypes, dim, |_, _| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        for mut row in w.row_iter_mut() {
            let n = row.norm();
            if n > 0.0 {
                row /= n;
            }
        }
        Self::new(w, center_momentum)
    }

    pub fn prototypes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn logits(&self, feature: &DVector<f64>) -> Result<DVector<f64>> {
        if feature.len() != self.dim() {
            return Err(Error::Shape(alloc::format!(
                "feature has dimension {}, head expects {}",
                feature.len(),
                self.dim()
            )));
        }
        Ok(&self.weights * feature)
    }

    /// Maps a gradient wrt logits back to a gradient wrt the input feature.
    pub fn backprop(&self, grad_logits: &DVector<f64>) -> DVector<f64> {
        self.weights.transpose() * grad_logits
    }
}
