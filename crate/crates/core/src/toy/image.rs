use alloc::format;
#[allow(unused_imports)] // inherent float methods exist only with std
use num_traits::Float;
use alloc::vec::Vec;

use crate::distill::CropRect;
use crate::error::{Error, Result};

/// 8-bit grayscale raster, row-major. Intensities map to `[0, 1]` as `p / 255`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height || width == 0 || height == 0 {
            return Err(Error::Shape(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Quantizes `[0, 1]` intensities (clamped) to 8 bits.
    pub fn from_intensities(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        let pixels = values
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, u: usize, v: usize) -> u8 {
        self.pixels[v * self.width + u]
    }

    pub fn intensity(&self, u: usize, v: usize) -> f64 {
        f64::from(self.get(u, v)) / 255.0
    }

    /// Zero-centered encoder input for the full image, values in `[-0.5, 0.5]`.
    pub fn to_input(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| f64::from(p) / 255.0 - 0.5).collect()
    }

    /// Bilinear resample of `rect` to an `out × out` encoder input.
    pub fn crop_to_input(&self, rect: &CropRect, out: usize) -> Vec<f64> {
        let mut buf = Vec::with_capacity(out * out);
        let step = rect.size as f64 / out as f64;
        let sample = |x: f64, y: f64| -> f64 {
            let x = x.clamp(0.0, (self.width - 1) as f64);
            let y = y.clamp(0.0, (self.height - 1) as f64);
            let (x0, y0) = (x.floor() as usize, y.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
            let (fx, fy) = (x - x0 as f64, y - y0 as f64);
            let top = self.intensity(x0, y0) * (1.0 - fx) + self.intensity(x1, y0) * fx;
            let bottom = self.intensity(x0, y1) * (1.0 - fx) + self.intensity(x1, y1) * fx;
            top * (1.0 - fy) + bottom * fy
        };
        for j in 0..out {
            for i in 0..out {
                let x = rect.x as f64 + (i as f64 + 0.5) * step - 0.5;
                let y = rect.y as f64 + (j as f64 + 0.5) * step - 0.5;
                buf.push(sample(x, y) - 0.5);
            }
        }
        buf
    }
}
