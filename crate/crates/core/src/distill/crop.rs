use alloc::format;
#[allow(unused_imports)] // inherent float methods exist only with std
use num_traits::Float;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Axis-aligned square crop in pixel coordinates, `[x, x+size) × [y, y+size)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropRect {
    pub x: usize,
    pub y: usize,
    pub size: usize,
    /// Sampled side length as a fraction of the short image side.
    pub scale: f64,
}

impl CropRect {
    pub fn contains(&self, u: usize, v: usize) -> bool {
        (self.x..self.x + self.size).contains(&u) && (self.y..self.y + self.size).contains(&v)
    }

    pub fn center(&self) -> (f64, f64) {
        let h = 0.5 * self.size as f64;
        (self.x as f64 + h, self.y as f64 + h)
    }
}

fn check_range(range: (f64, f64)) -> Result<()> {
    let (lo, hi) = range;
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(Error::Validation(format!(
            "crop scale range ({lo}, {hi}) must satisfy 0 < lo <= hi <= 1"
        )));
    }
    Ok(())
}

fn place(size: (usize, usize), center: (usize, usize), scale: f64) -> CropRect {
    let short = size.0.min(size.1);
    let side = ((scale * short as f64).round() as usize).clamp(1, short);
    let start = |c: usize, extent: usize| c.saturating_sub(side / 2).min(extent - side);
    CropRect {
        x: start(center.0, size.0),
        y: start(center.1, size.1),
        size: side,
        scale,
    }
}

/// Region-of-interaction crop: a square centered on the contact pixel, side
/// drawn uniformly from `scale_range` times the short side, then shifted the
/// minimum amount needed to stay inside the image.
pub fn roint_crop(
    image_size: (usize, usize),
    interaction_center: (usize, usize),
    scale_range: (f64, f64),
    seed: u64,
) -> Result<CropRect> {
    roint_crop_with(
        image_size,
        interaction_center,
        scale_range,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
}

pub fn roint_crop_with<R: Rng + ?Sized>(
    image_size: (usize, usize),
    interaction_center: (usize, usize),
    scale_range: (f64, f64),
    rng: &mut R,
) -> Result<CropRect> {
    check_range(scale_range)?;
    let (w, h) = image_size;
    let (u, v) = interaction_center;
    if u >= w || v >= h {
        return Err(Error::Validation(format!(
            "interaction center ({u}, {v}) outside {w}x{h} image"
        )));
    }
    let scale = sample_scale(scale_range, rng);
    Ok(place(image_size, interaction_center, scale))
}

fn sample_scale<R: Rng + ?Sized>((lo, hi): (f64, f64), rng: &mut R) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Unconstrained multi-crop view: center uniform over all pixels.
/// Returns the crop and the sampled center.
pub fn random_crop<R: Rng + ?Sized>(
    image_size: (usize, usize),
    scale_range: (f64, f64),
    rng: &mut R,
) -> Result<(CropRect, (usize, usize))> {
    check_range(scale_range)?;
    let (w, h) = image_size;
    if w == 0 || h == 0 {
        return Err(Error::Validation("image has zero size".into()));
    }
    let center = (rng.random_range(0..w), rng.random_range(0..h));
    let scale = sample_scale(scale_range, rng);
    Ok((place(image_size, center, scale), center))
}

/// Block-wise patch mask on a `grid = (cols, rows)` patch grid with roughly
/// `ratio` of patches masked (at least one, never all).
pub fn block_mask<R: Rng + ?Sized>(grid: (usize, usize), ratio: f64, rng: &mut R) -> Result<Vec<bool>> {
    let (cols, rows) = grid;
    let n = cols * rows;
    if n < 2 {
        return Err(Error::Validation("patch grid needs at least two patches".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config("mask_ratio", "must lie in (0, 1)"));
    }
    let target = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    let mut mask = alloc::vec![false; n];
    let mut masked = 0;
    while masked < target {
        let remaining = target - masked;
        let bw = rng.random_range(1..=cols.min(remaining));
        let bh = rng.random_range(1..=rows.min(remaining / bw).max(1));
        let x0 = rng.random_range(0..=cols - bw);
        let y0 = rng.random_range(0..=rows - bh);
        for y in y0..y0 + bh {
            for x in x0..x0 + bw {
                let i = y * cols + x;
                if !mask[i] && masked < target {
                    mask[i] = true;
                    masked += 1;
                }
            }
        }
    }
    Ok(mask)
}
