use alloc::format;
#[allow(unused_imports)] // inherent float methods exist only with std
use num_traits::Float;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::{DistillConfig, FeatureVector, PrototypeHead};
use crate::error::{Error, Result};

/// `softmax(logits / temp)`, max-shifted.
pub fn softmax(logits: &DVector<f64>, temp: f64) -> DVector<f64> {
    let max = logits.max();
    let mut e = logits.map(|z| ((z - max) / temp).exp());
    let sum = e.sum();
    e /= sum;
    e
}

/// `log_softmax(logits / temp)` via log-sum-exp.
pub fn log_softmax(logits: &DVector<f64>, temp: f64) -> DVector<f64> {
    let scaled = logits / temp;
    let max = scaled.max();
    let lse = max + scaled.map(|z| (z - max).exp()).sum().ln();
    scaled.map(|z| z - lse)
}

fn check_temps(cfg: &DistillConfig) -> Result<()> {
    if !(cfg.teacher_temp.is_finite() && cfg.teacher_temp > 0.0) {
        return Err(Error::config("teacher_temp", "must be > 0"));
    }
    if !(cfg.student_temp.is_finite() && cfg.student_temp > 0.0) {
        return Err(Error::config("student_temp", "must be > 0"));
    }
    Ok(())
}

/// Loss value with its gradient wrt the student logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitLoss {
    pub loss: f64,
    pub grad_logits: DVector<f64>,
}

/// Cross-entropy between the centered, sharpened teacher distribution and the
/// student distribution. The teacher side is a constant.
pub fn dino_loss_logits(
    teacher_logits: &DVector<f64>,
    center: &DVector<f64>,
    student_logits: &DVector<f64>,
    cfg: &DistillConfig,
) -> Result<LogitLoss> {
    check_temps(cfg)?;
    let k = student_logits.len();
    if teacher_logits.len() != k || center.len() != k {
        return Err(Error::Shape(format!(
            "teacher logits {}, center {}, student logits {k}",
            teacher_logits.len(),
            center.len()
        )));
    }
    let target = softmax(&(teacher_logits - center), cfg.teacher_temp);
    let log_student = log_softmax(student_logits, cfg.student_temp);
    let loss = -target.dot(&log_student);
    let grad_logits = (log_student.map(f64::exp) - target) / cfg.student_temp;
    Ok(LogitLoss { loss, grad_logits })
}

/// DINO loss for one (teacher, student) feature pair through the prototype head.
pub fn dino_loss(
    head: &PrototypeHead,
    teacher: &FeatureVector,
    student: &FeatureVector,
    cfg: &DistillConfig,
) -> Result<LogitLoss> {
    let t = head.logits(teacher)?;
    let s = head.logits(student)?;
    dino_loss_logits(&t, &head.center, &s, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchLoss {
    pub loss: f64,
    /// P×K gradient wrt student patch logits; zero rows at unmasked patches.
    pub grad_logits: DMatrix<f64>,
}

/// Mean per-patch cross-entropy over masked positions. Rows are patches.
pub fn ibot_loss_logits(
    teacher_logits: &DMatrix<f64>,
    center: &DVector<f64>,
    student_logits: &DMatrix<f64>,
    mask: &[bool],
    cfg: &DistillConfig,
) -> Result<PatchLoss> {
    check_temps(cfg)?;
    let (p, k) = student_logits.shape();
    if teacher_logits.shape() != (p, k) || mask.len() != p || center.len() != k {
        return Err(Error::Shape(format!(
            "teacher {:?}, student {:?}, mask {}, center {}",
            teacher_logits.shape(),
            (p, k),
            mask.len(),
            center.len()
        )));
    }
    let masked = mask.iter().filter(|&&m| m).count();
    if masked == 0 {
        return Err(Error::Validation("iBOT needs at least one masked patch".into()));
    }
    let scale = 1.0 / masked as f64;
    let mut loss = 0.0;
    let mut grad_logits = DMatrix::zeros(p, k);
    for i in (0..p).filter(|&i| mask[i]) {
        let t = teacher_logits.row(i).transpose();
        let s = student_logits.row(i).transpose();
        let part = dino_loss_logits(&t, center, &s, cfg)?;
        loss += part.loss * scale;
        grad_logits.set_row(i, &(part.grad_logits * scale).transpose());
    }
    Ok(PatchLoss { loss, grad_logits })
}

/// iBOT loss on P×D patch features through the shared prototype head.
pub fn ibot_loss(
    head: &PrototypeHead,
    teacher_patches: &DMatrix<f64>,
    student_patch_preds: &DMatrix<f64>,
    mask: &[bool],
    cfg: &DistillConfig,
) -> Result<PatchLoss> {
    let d = head.dim();
    if teacher_patches.ncols() != d || student_patch_preds.ncols() != d {
        return Err(Error::Shape(format!(
            "patch features must have {d} columns, got {} and {}",
            teacher_patches.ncols(),
            student_patch_preds.ncols()
        )));
    }
    let wt = head.weights.transpose();
    ibot_loss_logits(
        &(teacher_patches * &wt),
        &head.center,
        &(student_patch_preds * &wt),
        mask,
        cfg,
    )
}

/// `-(1/B) Σ log(d_i + eps)` with `d_i` the distance from the L2-normalized
/// row `i` to its nearest other row. The neighbor index is held fixed when
/// differentiating; a zero distance contributes no gradient.
pub fn koleo_loss(embeddings: &DMatrix<f64>, epsilon: f64) -> Result<(f64, DMatrix<f64>)> {
    let (b, d) = embeddings.shape();
    if b < 2 {
        return Err(Error::Validation(format!("KoLeo needs at least 2 embeddings, got {b}")));
    }
    let norms: Vec<f64> = embeddings.row_iter().map(|r| r.norm()).collect();
    if norms.iter().any(|&n| !(n > 0.0) || !n.is_finite()) {
        return Err(Error::Degenerate("KoLeo embedding with zero or non-finite norm".into()));
    }
    let unit = DMatrix::from_fn(b, d, |i, j| embeddings[(i, j)] / norms[i]);

    let mut loss = 0.0;
    let mut grad_unit = DMatrix::<f64>::zeros(b, d);
    let w = 1.0 / b as f64;
    for i in 0..b {
        let mut best = (usize::MAX, f64::INFINITY);
        for j in (0..b).filter(|&j| j != i) {
            let dist = (unit.row(i) - unit.row(j)).norm();
            if dist < best.1 {
                best = (j, dist);
            }
        }
        let (j, dist) = best;
        loss -= w * (dist + epsilon).ln();
        if dist > 0.0 {
            let coeff = -w / ((dist + epsilon) * dist);
            let diff = unit.row(i) - unit.row(j);
            for c in 0..d {
                grad_unit[(i, c)] += coeff * diff[c];
                grad_unit[(j, c)] -= coeff * diff[c];
            }
        }
    }

    // through x̂ = x / |x|: dx = (I - x̂ x̂ᵀ) dx̂ / |x|
    let mut grad = DMatrix::zeros(b, d);
    for i in 0..b {
        let u = unit.row(i);
        let g = grad_unit.row(i);
        let radial = g.dot(&u);
        grad.set_row(i, &((g - u * radial) / norms[i]));
    }
    Ok((loss, grad))
}

/// One student view scored against `teacher_global[target]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentView {
    pub features: FeatureVector,
    pub is_local_crop: bool,
    pub target: usize,
}

/// All inputs to the total objective for one optimization step.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillBatch {
    pub teacher_global: Vec<FeatureVector>,
    pub student_views: Vec<StudentView>,
    /// P×D teacher patch features (rows are patches).
    pub teacher_patches: DMatrix<f64>,
    /// P×D student patch predictions.
    pub student_patch_preds: DMatrix<f64>,
    pub patch_mask: Vec<bool>,
    /// B×D student global embeddings regularized by KoLeo.
    pub student_batch_embeddings: DMatrix<f64>,
}

impl DistillBatch {
    pub fn has_global_view(&self) -> bool {
        self.student_views.iter().any(|v| !v.is_local_crop)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss {
    pub dino: f64,
    pub ibot: f64,
    pub koleo: f64,
    pub total: f64,
    /// Gradient of `total` wrt each student view's features.
    pub grad_student_views: Vec<DVector<f64>>,
    /// Gradient of `total` wrt `student_patch_preds`.
    pub grad_patch_preds: DMatrix<f64>,
    /// Gradient of `total` wrt `student_batch_embeddings` (already scaled by lambda).
    pub grad_batch_embeddings: DMatrix<f64>,
}

/// `dino + ibot + lambda * koleo`. DINO averages over student views; iBOT and
/// KoLeo are active only when at least one student view is a global view.
pub fn total_loss(batch: &DistillBatch, head: &PrototypeHead, cfg: &DistillConfig) -> Result<TotalLoss> {
    cfg.validate()?;
    if batch.student_views.is_empty() {
        return Err(Error::Validation("batch has no student views".into()));
    }
    let teacher_logits = batch
        .teacher_global
        .iter()
        .map(|t| head.logits(t))
        .collect::<Result<Vec<_>>>()?;

    let n_views = batch.student_views.len() as f64;
    let mut dino = 0.0;
    let mut grad_student_views = Vec::with_capacity(batch.student_views.len());
    for view in &batch.student_views {
        let t = teacher_logits.get(view.target).ok_or_else(|| {
            Error::Validation(format!(
                "student view targets teacher {} of {}",
                view.target,
                teacher_logits.len()
            ))
        })?;
        let s = head.logits(&view.features)?;
        let part = dino_loss_logits(t, &head.center, &s, cfg)?;
        dino += part.loss / n_views;
        grad_student_views.push(head.backprop(&part.grad_logits) / n_views);
    }

    let (p, d) = batch.student_patch_preds.shape();
    let mut grad_patch_preds = DMatrix::zeros(p, d);
    let mut grad_batch_embeddings = DMatrix::zeros(
        batch.student_batch_embeddings.nrows(),
        batch.student_batch_embeddings.ncols(),
    );
    let (mut ibot, mut koleo) = (0.0, 0.0);
    if batch.has_global_view() {
        let patch = ibot_loss(
            head,
            &batch.teacher_patches,
            &batch.student_patch_preds,
            &batch.patch_mask,
            cfg,
        )?;
        ibot = patch.loss;
        grad_patch_preds = patch.grad_logits * &head.weights;
        let (k_loss, k_grad) = koleo_loss(&batch.student_batch_embeddings, cfg.koleo_epsilon)?;
        koleo = k_loss;
        grad_batch_embeddings = k_grad * cfg.lambda;
    }
    Ok(TotalLoss {
        dino,
        ibot,
        koleo,
        total: dino + ibot + cfg.lambda * koleo,
        grad_student_views,
        grad_patch_preds,
        grad_batch_embeddings,
    })
}

/// `center ← m·center + (1−m)·mean(teacher logits)`; rows of the batch are samples.
pub fn update_center(head: &mut PrototypeHead, teacher_logits: &DMatrix<f64>) -> Result<DVector<f64>> {
    if teacher_logits.nrows() == 0 {
        return Err(Error::Validation("center update needs a nonempty batch".into()));
    }
    if teacher_logits.ncols() != head.center.len() {
        return Err(Error::Shape(format!(
            "teacher logits have {} columns, center has {}",
            teacher_logits.ncols(),
            head.center.len()
        )));
    }
    let m = head.center_momentum;
    let mean = teacher_logits.row_mean().transpose();
    head.center = &head.center * m + mean * (1.0 - m);
    Ok(head.center.clone())
}
