//! User-drawn regions: freehand closed paths rasterized to pixel masks,
//! grouped into source/target correspondences plus keep regions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in continuous image coordinates. Pixel `(x, y)` covers
/// `[x, x + 1) × [y, y + 1)` and has its center at `(x + 0.5, y + 0.5)`.
pub type PathPoint = [f64; 2];

/// Boolean per-pixel membership, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionMask {
    width: usize,
    height: usize,
    member: Vec<bool>,
}

impl RegionMask {
    pub fn new(width: usize, height: usize, member: Vec<bool>) -> Result<Self> {
        if member.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "mask of {} entries for {width}x{height}",
                member.len()
            )));
        }
        Ok(Self {
            width,
            height,
            member,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            member: vec![false; width * height],
        }
    }

    /// Axis-aligned rectangle of pixels `x0..x1` by `y0..y1` (exclusive ends).
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        let mut mask = Self::empty(width, height);
        for y in y0.min(height)..y1.min(height) {
            for x in x0.min(width)..x1.min(width) {
                mask.member[y * width + x] = true;
            }
        }
        mask
    }

    /// Grayscale mask convention: a value of 128 or more marks a member.
    pub fn from_luma(width: usize, height: usize, luma: &[u8]) -> Result<Self> {
        Self::new(width, height, luma.iter().map(|&v| v >= 128).collect())
    }

    pub fn to_luma(&self) -> Vec<u8> {
        self.member.iter().map(|&m| if m { 255 } else { 0 }).collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn contains(&self, index: usize) -> bool {
        self.member[index]
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.member[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.member[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.member
    }

    pub fn count(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.member.iter().any(|&m| m)
    }

    /// Row-major indices of member pixels.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.member
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
    }

    pub fn check_dims(&self, name: &str, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                name: name.to_string(),
                actual_width: self.width,
                actual_height: self.height,
                expected_width: dims.0,
                expected_height: dims.1,
            });
        }
        Ok(())
    }
}

/// Even-odd fill of the implicitly closed polygon `path`, sampled at
/// pixel centers. Points are clamped to the canvas first.
pub fn rasterize_closed_path(path: &[PathPoint], width: usize, height: usize) -> Result<RegionMask> {
    if path.len() < 3 {
        return Err(Error::EmptyRegion(format!(
            "path has {} point(s), need at least 3",
            path.len()
        )));
    }
    let pts: Vec<PathPoint> = path
        .iter()
        .map(|&[x, y]| [x.clamp(0.0, width as f64), y.clamp(0.0, height as f64)])
        .collect();
    if shoelace_area(&pts) == 0.0 {
        return Err(Error::EmptyRegion("polygon has zero area".into()));
    }

    let mut mask = RegionMask::empty(width, height);
    let mut crossings = Vec::new();
    for y in 0..height {
        let py = y as f64 + 0.5;
        crossings.clear();
        let mut j = pts.len() - 1;
        for i in 0..pts.len() {
            let [xi, yi] = pts[i];
            let [xj, yj] = pts[j];
            if (yi > py) != (yj > py) {
                crossings.push((xj - xi) * (py - yi) / (yj - yi) + xi);
            }
            j = i;
        }
        if crossings.is_empty() {
            continue;
        }
        crossings.sort_by(f64::total_cmp);
        for x in 0..width {
            let px = x as f64 + 0.5;
            let right = crossings.len() - crossings.partition_point(|&c| c <= px);
            if right % 2 == 1 {
                mask.member[y * width + x] = true;
            }
        }
    }
    if mask.is_empty() {
        return Err(Error::EmptyRegion("polygon covers no pixel centers".into()));
    }
    Ok(mask)
}

fn shoelace_area(pts: &[PathPoint]) -> f64 {
    let mut twice = 0.0;
    for (i, a) in pts.iter().enumerate() {
        let b = pts[(i + 1) % pts.len()];
        twice += a[0] * b[1] - b[0] * a[1];
    }
    twice.abs() / 2.0
}

/// One source region recolored from a region of a named target image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub source_region: RegionMask,
    pub target_id: String,
    pub target_region: RegionMask,
}

/// Ordered correspondences plus regions whose colors must stay put.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceSet {
    pub correspondences: Vec<Correspondence>,
    pub keep_regions: Vec<RegionMask>,
}

impl CorrespondenceSet {
    pub fn new(correspondences: Vec<Correspondence>, keep_regions: Vec<RegionMask>) -> Self {
        Self {
            correspondences,
            keep_regions,
        }
    }

    /// Source-image masks with a diagnostic label each.
    pub fn labeled_source_masks(&self) -> Vec<(String, &RegionMask)> {
        let pairs = self
            .correspondences
            .iter()
            .enumerate()
            .map(|(i, c)| (format!("correspondence[{i}].source_region"), &c.source_region));
        let keeps = self
            .keep_regions
            .iter()
            .enumerate()
            .map(|(i, m)| (format!("keep[{i}]"), m));
        pairs.chain(keeps).collect()
    }
}

/// Checks dimensions, non-emptiness, target references and disjointness,
/// and requires at least one correspondence.
pub fn validate_set(
    set: CorrespondenceSet,
    source_dims: (usize, usize),
    target_dims: &HashMap<String, (usize, usize)>,
) -> Result<CorrespondenceSet> {
    if set.correspondences.is_empty() {
        return Err(Error::NoCorrespondences);
    }
    validate_regions(set, source_dims, target_dims)
}

/// [`validate_set`] without the at-least-one-correspondence rule.
pub fn validate_regions(
    set: CorrespondenceSet,
    source_dims: (usize, usize),
    target_dims: &HashMap<String, (usize, usize)>,
) -> Result<CorrespondenceSet> {
    for (i, c) in set.correspondences.iter().enumerate() {
        let dims = *target_dims
            .get(&c.target_id)
            .ok_or_else(|| Error::UnknownTarget(c.target_id.clone()))?;
        let name = format!("correspondence[{i}].target_region");
        c.target_region.check_dims(&name, dims)?;
        if c.target_region.is_empty() {
            return Err(Error::EmptyRegion(name));
        }
    }
    let sources = set.labeled_source_masks();
    for (name, mask) in &sources {
        mask.check_dims(name, source_dims)?;
        if mask.is_empty() {
            return Err(Error::EmptyRegion(name.clone()));
        }
    }

    let n = source_dims.0 * source_dims.1;
    let mut cover = vec![0u16; n];
    for (_, mask) in &sources {
        for i in mask.indices() {
            cover[i] = cover[i].saturating_add(1);
        }
    }
    let count = cover.iter().filter(|&&c| c > 1).count();
    if count > 0 {
        let mut pairs = Vec::new();
        for (a, (name_a, mask_a)) in sources.iter().enumerate() {
            for (name_b, mask_b) in &sources[a + 1..] {
                if mask_a.indices().any(|i| mask_b.contains(i)) {
                    pairs.push((name_a.clone(), name_b.clone()));
                }
            }
        }
        return Err(Error::OverlappingRegions { count, pairs });
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Classic crossing-number test, independent of the scanline fill.
    fn point_in_polygon(poly: &[PathPoint], px: f64, py: f64) -> bool {
        let mut inside = false;
        let mut j = poly.len() - 1;
        for i in 0..poly.len() {
            let (xi, yi) = (poly[i][0], poly[i][1]);
            let (xj, yj) = (poly[j][0], poly[j][1]);
            if ((yi > py) != (yj > py)) && (px < (xj - xi) * (py - yi) / (yj - yi) + xi) {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    fn square() -> Vec<PathPoint> {
        vec![[1.0, 1.0], [4.0, 1.0], [4.0, 4.0], [1.0, 4.0]]
    }

    #[test]
    fn square_covers_nine_pixels() {
        let mask = rasterize_closed_path(&square(), 5, 5).unwrap();
        assert_eq!(mask.count(), 9);
        for y in 0..5 {
            for x in 0..5 {
                assert_eq!(mask.get(x, y), (1..=3).contains(&x) && (1..=3).contains(&y));
            }
        }
    }

    #[test]
    fn collinear_triangle_is_empty() {
        let err = rasterize_closed_path(&[[0.0, 0.0], [2.0, 2.0], [4.0, 4.0]], 5, 5).unwrap_err();
        assert!(err.to_string().contains("empty region"));
    }

    #[test]
    fn two_points_is_empty() {
        let err = rasterize_closed_path(&[[0.0, 0.0], [2.0, 2.0]], 5, 5).unwrap_err();
        assert!(err.to_string().contains("empty region"));
    }

    #[test]
    fn random_octagon_matches_point_in_polygon() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (cx, cy) = (16.0, 16.0);
            let mut angles: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
            angles.sort_by(f64::total_cmp);
            let poly: Vec<PathPoint> = angles
                .iter()
                .map(|&a| {
                    let r = rng.random_range(4.0..15.0);
                    [cx + r * a.cos(), cy + r * a.sin()]
                })
                .collect();
            let mask = rasterize_closed_path(&poly, 32, 32).unwrap();
            for y in 0..32 {
                for x in 0..32 {
                    let expect = point_in_polygon(&poly, x as f64 + 0.5, y as f64 + 0.5);
                    assert_eq!(mask.get(x, y), expect, "pixel ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn points_are_clamped_to_canvas() {
        let mask = rasterize_closed_path(&[[-5.0, -5.0], [50.0, -5.0], [50.0, 50.0], [-5.0, 50.0]], 4, 3).unwrap();
        assert_eq!(mask.count(), 12);
    }

    #[test]
    fn luma_threshold() {
        let mask = RegionMask::from_luma(4, 1, &[0, 127, 128, 255]).unwrap();
        assert_eq!(mask.as_slice(), &[false, false, true, true]);
    }

    fn dims_map(entries: &[(&str, (usize, usize))]) -> HashMap<String, (usize, usize)> {
        entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn pair(src: RegionMask, target: &str, tgt: RegionMask) -> Correspondence {
        Correspondence {
            source_region: src,
            target_id: target.into(),
            target_region: tgt,
        }
    }

    #[test]
    fn accepts_single_correspondence() {
        let set = CorrespondenceSet::new(
            vec![pair(RegionMask::rect(20, 20, 0, 0, 5, 5), "t", RegionMask::rect(8, 6, 0, 0, 3, 3))],
            vec![],
        );
        let out = validate_set(set.clone(), (20, 20), &dims_map(&[("t", (8, 6))])).unwrap();
        assert_eq!(out, set);
    }

    #[test]
    fn overlapping_sources_report_count() {
        let set = CorrespondenceSet::new(
            vec![
                pair(RegionMask::rect(20, 20, 0, 0, 5, 5), "t", RegionMask::rect(8, 6, 0, 0, 3, 3)),
                pair(RegionMask::rect(20, 20, 4, 4, 9, 9), "t", RegionMask::rect(8, 6, 0, 0, 3, 3)),
            ],
            vec![],
        );
        match validate_set(set, (20, 20), &dims_map(&[("t", (8, 6))])).unwrap_err() {
            Error::OverlappingRegions { count, pairs } => {
                assert_eq!(count, 1);
                assert_eq!(
                    pairs,
                    vec![(
                        "correspondence[0].source_region".to_string(),
                        "correspondence[1].source_region".to_string()
                    )]
                );
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn keep_with_wrong_size_is_rejected() {
        let set = CorrespondenceSet::new(
            vec![pair(RegionMask::rect(20, 20, 0, 0, 5, 5), "t", RegionMask::rect(8, 6, 0, 0, 3, 3))],
            vec![RegionMask::rect(10, 10, 0, 0, 2, 2)],
        );
        let err = validate_set(set, (20, 20), &dims_map(&[("t", (8, 6))])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { ref name, .. } if name == "keep[0]"));
        assert!(err.to_string().starts_with("dimension mismatch"));
    }

    #[test]
    fn keep_overlapping_source_is_rejected() {
        let set = CorrespondenceSet::new(
            vec![pair(RegionMask::rect(20, 20, 0, 0, 5, 5), "t", RegionMask::rect(8, 6, 0, 0, 3, 3))],
            vec![RegionMask::rect(20, 20, 3, 3, 6, 6)],
        );
        let err = validate_set(set, (20, 20), &dims_map(&[("t", (8, 6))])).unwrap_err();
        assert!(matches!(err, Error::OverlappingRegions { count: 4, .. }));
    }

    #[test]
    fn unknown_target_and_no_pairs() {
        let set = CorrespondenceSet::new(
            vec![pair(RegionMask::rect(20, 20, 0, 0, 5, 5), "nope", RegionMask::rect(8, 6, 0, 0, 3, 3))],
            vec![],
        );
        assert!(matches!(
            validate_set(set, (20, 20), &dims_map(&[("t", (8, 6))])),
            Err(Error::UnknownTarget(_))
        ));
        assert!(matches!(
            validate_set(CorrespondenceSet::default(), (20, 20), &HashMap::new()),
            Err(Error::NoCorrespondences)
        ));
    }

    #[test]
    fn empty_mask_is_rejected() {
        let set = CorrespondenceSet::new(
            vec![pair(RegionMask::empty(20, 20), "t", RegionMask::rect(8, 6, 0, 0, 3, 3))],
            vec![],
        );
        let err = validate_set(set, (20, 20), &dims_map(&[("t", (8, 6))])).unwrap_err();
        assert!(err.to_string().contains("empty region"));
    }

    proptest! {
        #[test]
        fn validate_is_idempotent(x0 in 0usize..10, y0 in 0usize..10, kx in 0usize..20, ky in 0usize..20) {
            let set = CorrespondenceSet::new(
                vec![pair(RegionMask::rect(20, 20, x0, y0, x0 + 3, y0 + 3), "t", RegionMask::rect(8, 6, 0, 0, 3, 3))],
                vec![RegionMask::rect(20, 20, kx, ky, kx + 2, ky + 2)],
            );
            let dims = dims_map(&[("t", (8, 6))]);
            let once = validate_set(set, (20, 20), &dims);
            match once {
                Ok(s) => prop_assert_eq!(validate_set(s.clone(), (20, 20), &dims).unwrap(), s),
                Err(e) => {
                    let overlap = matches!(e, Error::OverlappingRegions { .. });
                    prop_assert!(overlap);
                }
            }
        }

        #[test]
        fn rasterization_scales_with_resolution(
            seed in 0u64..1000,
            n in 2usize..4,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut angles: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
            angles.sort_by(f64::total_cmp);
            let poly: Vec<PathPoint> = angles
                .iter()
                .map(|&a| {
                    let r = rng.random_range(5.0..11.0);
                    [12.0 + r * a.cos(), 12.0 + r * a.sin()]
                })
                .collect();
            let Ok(base) = rasterize_closed_path(&poly, 24, 24) else { return Ok(()); };
            let scaled_poly: Vec<PathPoint> = poly.iter().map(|p| [p[0] * n as f64, p[1] * n as f64]).collect();
            let scaled = rasterize_closed_path(&scaled_poly, 24 * n, 24 * n).unwrap();
            let perimeter: f64 = (0..poly.len())
                .map(|i| {
                    let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
                    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
                })
                .sum();
            let expected = (base.count() * n * n) as f64;
            let band = perimeter * n as f64;
            prop_assert!((scaled.count() as f64 - expected).abs() <= band);
        }
    }
}
