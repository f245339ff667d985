//! PNG rasters: 16-bit depth, 8-bit masks and 8-bit grayscale frames.

use std::path::Path;

use embodi_core::filter::SegmentationMask;
use embodi_core::geometry::{BoolImage, DepthImage};
use embodi_core::toy::GrayImage;
use image::{DynamicImage, ImageBuffer, ImageReader, Luma};

use crate::error::{create_dir, Error, Result};

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    reader
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::format(path, e))
}

fn save<P: image::Pixel<Subpixel = S> + image::PixelWithColorType, S: image::Primitive>(
    path: &Path,
    buf: ImageBuffer<P, Vec<S>>,
) -> Result<()>
where
    [S]: image::EncodableLayout,
{
    if let Some(dir) = path.parent() {
        create_dir(dir)?;
    }
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::format(path, e))
}

pub fn read_depth_png(path: &Path) -> Result<DepthImage> {
    match decode(path)? {
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            Ok(DepthImage::new(w as usize, h as usize, buf.into_raw())?)
        }
        other => Err(Error::format(
            path,
            format!("depth must be a 16-bit single-channel PNG, found {:?}", other.color()),
        )),
    }
}

pub fn write_depth_png(path: &Path, depth: &DepthImage) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(depth.width() as u32, depth.height() as u32, depth.values().to_vec())
            .expect("buffer length matches dimensions");
    save(path, buf)
}

/// Nonzero pixels are embodiment.
pub fn read_mask_png(path: &Path) -> Result<SegmentationMask> {
    match decode(path)? {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            let values = buf.into_raw().into_iter().map(|v| v != 0).collect();
            Ok(SegmentationMask(BoolImage::new(w as usize, h as usize, values)?))
        }
        other => Err(Error::format(
            path,
            format!("mask must be an 8-bit single-channel PNG, found {:?}", other.color()),
        )),
    }
}

pub fn write_mask_png(path: &Path, mask: &BoolImage) -> Result<()> {
    let raw = mask.values().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, raw).expect("buffer length matches");
    save(path, buf)
}

pub fn read_gray_png(path: &Path) -> Result<GrayImage> {
    match decode(path)? {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            Ok(GrayImage::new(w as usize, h as usize, buf.into_raw())?)
        }
        other => Err(Error::format(
            path,
            format!("frame must be an 8-bit grayscale PNG, found {:?}", other.color()),
        )),
    }
}

pub fn write_gray_png(path: &Path, img: &GrayImage) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, img.pixels().to_vec())
            .expect("buffer length matches");
    save(path, buf)
}
