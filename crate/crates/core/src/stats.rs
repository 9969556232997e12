//! Per-region mean / standard deviation and the statistics transfer that
//! maps a source region onto the color distribution of a target region.

use std::collections::HashMap;

use crate::colorspace::LabImage;
use crate::error::{Error, Result};
use crate::regions::{CorrespondenceSet, RegionMask};

/// Population statistics of one region, per channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStats {
    pub mean: [f64; 3],
    pub stddev: [f64; 3],
}

/// Compensated running sum.
#[derive(Default, Clone, Copy)]
struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    fn add(&mut self, v: f64) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Mean and population (divide-by-n) standard deviation over the mask,
/// accumulated in row-major order.
pub fn region_stats(img: &LabImage, mask: &RegionMask) -> Result<RegionStats> {
    if mask.dims() != img.dims() {
        return Err(Error::DimensionMismatch {
            name: "region mask".into(),
            actual_width: mask.width(),
            actual_height: mask.height(),
            expected_width: img.width(),
            expected_height: img.height(),
        });
    }
    let n = mask.count();
    if n == 0 {
        return Err(Error::EmptyRegion("statistics over an empty mask".into()));
    }
    let mut mean = [0.0; 3];
    let mut stddev = [0.0; 3];
    for c in 0..3 {
        let plane = &img.planes()[c];
        let mut acc = KahanSum::default();
        for i in mask.indices() {
            acc.add(plane[i]);
        }
        let mu = acc.sum / n as f64;
        let mut sq = KahanSum::default();
        for i in mask.indices() {
            let d = plane[i] - mu;
            sq.add(d * d);
        }
        mean[c] = mu;
        stddev[c] = (sq.sum / n as f64).sqrt();
    }
    Ok(RegionStats { mean, stddev })
}

/// Scale factor σ_t / σ_s, taken as 0 for a flat source channel so the
/// whole region lands on the target mean.
fn ratio(source: f64, target: f64) -> f64 {
    if source > 0.0 {
        target / source
    } else {
        0.0
    }
}

/// Applies the transfer to a single color.
pub fn transfer_color(color: [f64; 3], source: &RegionStats, target: &RegionStats) -> [f64; 3] {
    let mut out = [0.0; 3];
    for c in 0..3 {
        // (x - μ) + μ is not always x in floating point.
        if source.mean[c] == target.mean[c] && source.stddev[c] == target.stddev[c] {
            out[c] = color[c];
            continue;
        }
        let k = ratio(source.stddev[c], target.stddev[c]);
        out[c] = if k == 0.0 {
            target.mean[c]
        } else {
            k * (color[c] - source.mean[c]) + target.mean[c]
        };
    }
    out
}

/// Transferred colors for every member of `region`, in row-major order,
/// paired with their pixel index.
pub fn transfer_region(
    img: &LabImage,
    region: &RegionMask,
    source: &RegionStats,
    target: &RegionStats,
) -> Vec<(usize, [f64; 3])> {
    region
        .indices()
        .map(|i| (i, transfer_color(img.color(i), source, target)))
        .collect()
}

/// Sparse per-pixel color targets over the source image.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintField {
    width: usize,
    height: usize,
    targets: Vec<Option<[f64; 3]>>,
}

impl ConstraintField {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            targets: vec![None; width * height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn set(&mut self, index: usize, target: [f64; 3]) {
        debug_assert!(target.iter().all(|v| v.is_finite()));
        self.targets[index] = Some(target);
    }

    pub fn get(&self, index: usize) -> Option<[f64; 3]> {
        self.targets[index]
    }

    pub fn is_constrained(&self, index: usize) -> bool {
        self.targets[index].is_some()
    }

    pub fn constrained_count(&self) -> usize {
        self.targets.iter().filter(|t| t.is_some()).count()
    }

    /// `(pixel index, target)` for every constrained pixel.
    pub fn iter(&self) -> impl Iterator<Item = (usize, [f64; 3])> + '_ {
        self.targets
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.map(|t| (i, t)))
    }
}

/// Target values for every constrained source pixel: transferred colors
/// inside each correspondence's source region, original colors inside
/// keep regions.
pub fn build_constraints(
    img: &LabImage,
    set: &CorrespondenceSet,
    targets: &HashMap<String, LabImage>,
) -> Result<ConstraintField> {
    let mut field = ConstraintField::new(img.width(), img.height());
    for c in &set.correspondences {
        let target_img = targets
            .get(&c.target_id)
            .ok_or_else(|| Error::UnknownTarget(c.target_id.clone()))?;
        let source_stats = region_stats(img, &c.source_region)?;
        let target_stats = region_stats(target_img, &c.target_region)?;
        for (i, color) in transfer_region(img, &c.source_region, &source_stats, &target_stats) {
            field.set(i, color);
        }
    }
    for keep in &set.keep_regions {
        if keep.dims() != img.dims() {
            return Err(Error::DimensionMismatch {
                name: "keep region".into(),
                actual_width: keep.width(),
                actual_height: keep.height(),
                expected_width: img.width(),
                expected_height: img.height(),
            });
        }
        for i in keep.indices() {
            field.set(i, img.color(i));
        }
    }
    Ok(field)
}
