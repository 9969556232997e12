//! Downscaling for previews: area averaging for images, nearest neighbor
//! for masks.

use crate::colorspace::RgbImage;
use crate::regions::RegionMask;

/// Dimensions of `(width, height)` scaled so the longer side is at most
/// `max_dim`, preserving aspect ratio. Never returns a zero side.
pub fn fit_dims(width: usize, height: usize, max_dim: usize) -> (usize, usize) {
    let longest = width.max(height);
    if longest <= max_dim {
        return (width, height);
    }
    let s = max_dim as f64 / longest as f64;
    let w = ((width as f64 * s).round() as usize).clamp(1, max_dim);
    let h = ((height as f64 * s).round() as usize).clamp(1, max_dim);
    (w, h)
}

/// Overlap weights of destination cell `d` with each source cell, for a
/// 1-D box filter from `src` to `dst` samples.
fn box_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let lo = d as f64 * scale;
            let hi = (d + 1) as f64 * scale;
            let mut taps = Vec::new();
            let mut s = lo.floor() as usize;
            while (s as f64) < hi && s < src {
                let w = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
                if w > 0.0 {
                    taps.push((s, w / scale));
                }
                s += 1;
            }
            taps
        })
        .collect()
}

/// Area-average resample to `width × height` (intended for shrinking).
pub fn downscale_rgb(img: &RgbImage, width: usize, height: usize) -> RgbImage {
    if (width, height) == img.dims() {
        return img.clone();
    }
    let wx = box_weights(img.width(), width);
    let wy = box_weights(img.height(), height);
    RgbImage::from_fn(width, height, |x, y| {
        let mut acc = [0.0f64; 3];
        for &(sy, fy) in &wy[y] {
            for &(sx, fx) in &wx[x] {
                let p = img.get(sx, sy);
                for c in 0..3 {
                    acc[c] += fx * fy * p[c] as f64;
                }
            }
        }
        acc.map(|v| v.round().clamp(0.0, 255.0) as u8)
    })
    .expect("target dimensions are positive")
}

/// Nearest-neighbor resample of a mask, sampling at destination pixel
/// centers.
pub fn downscale_mask(mask: &RegionMask, width: usize, height: usize) -> RegionMask {
    if (width, height) == mask.dims() {
        return mask.clone();
    }
    let sx = mask.width() as f64 / width as f64;
    let sy = mask.height() as f64 / height as f64;
    let mut out = RegionMask::empty(width, height);
    for y in 0..height {
        let src_y = (((y as f64 + 0.5) * sy) as usize).min(mask.height() - 1);
        for x in 0..width {
            let src_x = (((x as f64 + 0.5) * sx) as usize).min(mask.width() - 1);
            if mask.get(src_x, src_y) {
                out.set(x, y, true);
            }
        }
    }
    out
}
