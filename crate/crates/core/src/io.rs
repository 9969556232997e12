//! PNG/JPEG reading and PNG writing.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbaImage};

use crate::colorspace::RgbImage;
use crate::error::{Error, Result};
use crate::regions::RegionMask;

fn from_dynamic(img: image::DynamicImage) -> Result<RgbImage> {
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let pixels = rgb.pixels().map(|p| p.0).collect();
    RgbImage::new(w, h, pixels)
}

pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::InvalidImage(format!("{}: {e}", path.display())))?;
    from_dynamic(img)
}

/// Decodes PNG or JPEG bytes.
pub fn decode_rgb(bytes: &[u8]) -> Result<RgbImage> {
    if bytes.is_empty() {
        return Err(Error::InvalidImage("empty input".into()));
    }
    let img = image::load_from_memory(bytes).map_err(|e| Error::InvalidImage(e.to_string()))?;
    from_dynamic(img)
}

/// Reads a mask image: pixels with luma ≥ 128 are members.
pub fn read_mask(path: impl AsRef<Path>) -> Result<RegionMask> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::InvalidImage(format!("{}: {e}", path.display())))?;
    let luma = img.to_luma8();
    RegionMask::from_luma(luma.width() as usize, luma.height() as usize, luma.as_raw())
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let raw: Vec<u8> = img.pixels().iter().flatten().copied().collect();
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, raw)
        .ok_or_else(|| Error::InvalidImage("buffer size".into()))?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn write_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_png(img)?)?;
    Ok(())
}

/// Writes a mask as an 8-bit grayscale PNG (members white).
pub fn write_mask(mask: &RegionMask, path: impl AsRef<Path>) -> Result<()> {
    let buf = image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, mask.to_luma())
        .ok_or_else(|| Error::InvalidImage("buffer size".into()))?;
    buf.save_with_format(path, ImageFormat::Png)?;
    Ok(())
}

pub fn encode_rgba_png(width: usize, height: usize, pixels: &[[u8; 4]]) -> Result<Vec<u8>> {
    let raw: Vec<u8> = pixels.iter().flatten().copied().collect();
    let buf = RgbaImage::from_raw(width as u32, height as u32, raw)
        .ok_or_else(|| Error::InvalidImage("buffer size".into()))?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}
