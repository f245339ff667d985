//! Two-layer patch encoder with a global (CLS-analogue) output and per-patch
//! outputs, parameters stored in one flat vector.
//!
//! ```text
//! u_p = tanh(A x_p + b + pos_p)        per patch
//! m   = mean_p u_p
//! g   = G m + g0                       global feature
//! z_p = C u_p + Q m + c0               patch features
//! ```

#[allow(unused_imports)] // inherent float methods exist only with std
use num_traits::Float;
use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DMatrixView, DVector, DVectorView};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderDims {
    pub image: usize,
    pub patch: usize,
    pub hidden: usize,
    pub feature: usize,
}

impl Default for EncoderDims {
    fn default() -> Self {
        Self {
            image: 32,
            patch: 8,
            hidden: 32,
            feature: 32,
        }
    }
}

impl EncoderDims {
    pub fn validate(&self) -> Result<()> {
        if self.patch == 0 || self.image == 0 || !self.image.is_multiple_of(self.patch) {
            return Err(Error::config("patch", "must divide the image size"));
        }
        if self.hidden == 0 {
            return Err(Error::config("hidden", "must be positive"));
        }
        if self.feature == 0 {
            return Err(Error::config("feature", "must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self) -> usize {
        self.image / self.patch
    }

    pub fn patches(&self) -> usize {
        self.grid() * self.grid()
    }

    pub fn patch_dim(&self) -> usize {
        self.patch * self.patch
    }

    fn layout(&self) -> Layout {
        let (h, d, pd, n) = (self.hidden, self.feature, self.patch_dim(), self.patches());
        let mut off = 0;
        let mut take = |len: usize| {
            let start = off;
            off += len;
            start
        };
        let a = take(h * pd);
        let b = take(h);
        let pos = take(h * n);
        let g = take(d * h);
        let g0 = take(d);
        let c = take(d * h);
        let q = take(d * h);
        let c0 = take(d);
        Layout {
            a,
            b,
            pos,
            g,
            g0,
            c,
            q,
            c0,
            len: off,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().len
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    a: usize,
    b: usize,
    pos: usize,
    g: usize,
    g0: usize,
    c: usize,
    q: usize,
    c0: usize,
    len: usize,
}

/// Output of one encoder pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub global: DVector<f64>,
    /// N×D patch features, one row per patch.
    pub patches: DMatrix<f64>,
}

/// Intermediate values kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Pd×N input patches (masked patches zeroed).
    inputs: DMatrix<f64>,
    /// H×N hidden activations.
    hidden: DMatrix<f64>,
    pooled: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder {
    dims: EncoderDims,
    params: Vec<f64>,
}

/// Global-feature extractor used by the analysis protocol.
pub trait GlobalEncoder {
    fn feature_dim(&self) -> usize;
    fn input_size(&self) -> usize;
    fn encode_global(&self, input: &[f64]) -> Result<DVector<f64>>;
}

impl ToyEncoder {
    /// Gaussian initialization scaled by fan-in.
    pub fn init(dims: EncoderDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let l = dims.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = alloc::vec![0.0; l.len];
        let mut fill = |range: core::ops::Range<usize>, std: f64| {
            let normal = Normal::new(0.0, std).expect("positive std");
            for p in &mut params[range] {
                *p = normal.sample(&mut rng);
            }
        };
        let (h, d, pd, n) = (dims.hidden, dims.feature, dims.patch_dim(), dims.patches());
        fill(l.a..l.a + h * pd, 2.0 / (pd as f64).sqrt());
        fill(l.pos..l.pos + h * n, 0.3);
        fill(l.g..l.g + d * h, 1.0 / (h as f64).sqrt());
        fill(l.c..l.c + d * h, 1.0 / (h as f64).sqrt());
        fill(l.q..l.q + d * h, 1.0 / (h as f64).sqrt());
        Ok(Self { dims, params })
    }

    pub fn from_params(dims: EncoderDims, params: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        if params.len() != dims.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters, dims require {}",
                params.len(),
                dims.param_count()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation("encoder parameters must be finite".into()));
        }
        Ok(Self { dims, params })
    }

    /// Shifts the output biases so global and patch features have zero mean
    /// over `inputs`. Stands in for the feature normalization a pretrained
    /// backbone would have learned.
    pub fn center_outputs(&mut self, inputs: &[Vec<f64>]) -> Result<()> {
        if inputs.is_empty() {
            return Err(Error::Validation("calibration needs at least one input".into()));
        }
        let d = self.dims.feature;
        let mut global = DVector::zeros(d);
        let mut patch = DVector::zeros(d);
        for x in inputs {
            let (out, _) = self.forward(x, None)?;
            global += &out.global;
            patch += out.patches.row_mean().transpose();
        }
        let n = inputs.len() as f64;
        let l = self.dims.layout();
        for i in 0..d {
            self.params[l.g0 + i] -= global[i] / n;
            self.params[l.c0 + i] -= patch[i] / n;
        }
        Ok(())
    }

    pub fn dims(&self) -> EncoderDims {
        self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// FNV-1a over the little-endian parameter bytes.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in &self.params {
            for b in p.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    fn mat(&self, off: usize, rows: usize, cols: usize) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(&self.params[off..off + rows * cols], rows, cols)
    }

    fn vec(&self, off: usize, len: usize) -> DVectorView<'_, f64> {
        DVectorView::from_slice(&self.params[off..off + len], len)
    }

    fn split_patches(&self, input: &[f64], mask: Option<&[bool]>) -> Result<DMatrix<f64>> {
        let dims = self.dims;
        let s = dims.image;
        if input.len() != s * s {
            return Err(Error::Shape(format!(
                "encoder input has {} values, expected {s}x{s}",
                input.len()
            )));
        }
        let n = dims.patches();
        if let Some(m) = mask {
            if m.len() != n {
                return Err(Error::Shape(format!("mask has {} entries, expected {n}", m.len())));
            }
        }
        let (g, ps) = (dims.grid(), dims.patch);
        let mut x = DMatrix::zeros(dims.patch_dim(), n);
        for p in 0..n {
            if mask.is_some_and(|m| m[p]) {
                continue;
            }
            let (px, py) = (p % g, p / g);
            for j in 0..ps {
                for i in 0..ps {
                    x[(j * ps + i, p)] = input[(py * ps + j) * s + px * ps + i];
                }
            }
        }
        Ok(x)
    }

    /// Encodes an `image × image` input. Patches with `mask[p] == true` are
    /// replaced by zeros before encoding.
    pub fn forward(&self, input: &[f64], mask: Option<&[bool]>) -> Result<(EncoderOutput, ForwardCache)> {
        let dims = self.dims;
        let l = dims.layout();
        let (h, d, pd, n) = (dims.hidden, dims.feature, dims.patch_dim(), dims.patches());
        let x = self.split_patches(input, mask)?;
        let a = self.mat(l.a, h, pd);
        let b = self.vec(l.b, h);
        let pos = self.mat(l.pos, h, n);
        let mut hidden = a * &x + pos;
        for mut col in hidden.column_iter_mut() {
            col += &b;
        }
        hidden.apply(|v| *v = v.tanh());
        let pooled = hidden.column_mean();
        let global = self.mat(l.g, d, h) * &pooled + self.vec(l.g0, d);
        let ctx = self.mat(l.q, d, h) * &pooled + self.vec(l.c0, d);
        let mut z = self.mat(l.c, d, h) * &hidden;
        for mut col in z.column_iter_mut() {
            col += &ctx;
        }
        Ok((
            EncoderOutput {
                global,
                patches: z.transpose(),
            },
            ForwardCache {
                inputs: x,
                hidden,
                pooled,
            },
        ))
    }

    /// Accumulates into `grad` the parameter gradient given upstream gradients
    /// wrt the global feature and (optionally) the N×D patch features.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_global: &DVector<f64>,
        grad_patches: Option<&DMatrix<f64>>,
        grad: &mut [f64],
    ) -> Result<()> {
        let dims = self.dims;
        let l = dims.layout();
        let (h, d, n) = (dims.hidden, dims.feature, dims.patches());
        if grad.len() != l.len || grad_global.len() != d {
            return Err(Error::Shape("gradient buffer does not match encoder".into()));
        }
        let g = self.mat(l.g, d, h);
        let c = self.mat(l.c, d, h);
        let q = self.mat(l.q, d, h);

        let mut add = |off: usize, m: &DMatrix<f64>| {
            for (dst, src) in grad[off..off + m.len()].iter_mut().zip(m.iter()) {
                *dst += src;
            }
        };

        add(l.g, &(grad_global * cache.pooled.transpose()));
        add(l.g0, &DMatrix::from_column_slice(d, 1, grad_global.as_slice()));
        let mut d_pooled = g.transpose() * grad_global;
        let mut d_hidden = DMatrix::zeros(h, n);

        if let Some(gz) = grad_patches {
            if gz.shape() != (n, d) {
                return Err(Error::Shape(format!(
                    "patch gradient is {:?}, expected {:?}",
                    gz.shape(),
                    (n, d)
                )));
            }
            let gz_t = gz.transpose();
            add(l.c, &(&gz_t * cache.hidden.transpose()));
            let col_sum = gz_t.column_sum();
            add(l.q, &(&col_sum * cache.pooled.transpose()));
            add(l.c0, &DMatrix::from_column_slice(d, 1, col_sum.as_slice()));
            d_pooled += q.transpose() * &col_sum;
            d_hidden += c.transpose() * &gz_t;
        }

        let share = d_pooled / n as f64;
        for mut col in d_hidden.column_iter_mut() {
            col += &share;
        }
        // tanh'
        d_hidden.zip_apply(&cache.hidden, |dv, u| *dv *= 1.0 - u * u);
        add(l.a, &(&d_hidden * cache.inputs.transpose()));
        add(l.b, &DMatrix::from_column_slice(h, 1, d_hidden.column_sum().as_slice()));
        add(l.pos, &d_hidden);
        Ok(())
    }
}

impl GlobalEncoder for ToyEncoder {
    fn feature_dim(&self) -> usize {
        self.dims.feature
    }

    fn input_size(&self) -> usize {
        self.dims.image
    }

    fn encode_global(&self, input: &[f64]) -> Result<DVector<f64>> {
        Ok(self.forward(input, None)?.0.global)
    }
}
