//! Procedural images and jobs for tests, examples and benchmarks.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colorspace::RgbImage;
use crate::pipeline::{PipelineConfig, TransferJob};
use crate::regions::{rasterize_closed_path, Correspondence, CorrespondenceSet, PathPoint, RegionMask};

/// Color of the left patch of [`two_patch`].
pub const GRAY: [u8; 3] = [128, 128, 128];
/// Color of the right patch of [`two_patch`].
pub const WARM: [u8; 3] = [196, 92, 58];
/// Color of the [`two_patch_job`] target.
pub const COOL: [u8; 3] = [52, 118, 190];

fn jitter(rng: &mut ChaCha8Rng, base: [u8; 3], amp: i32) -> [u8; 3] {
    base.map(|c| (c as i32 + rng.random_range(-amp..=amp)).clamp(0, 255) as u8)
}

/// A flat patch of `base` with uniform per-channel noise of ±`amp`.
pub fn noisy_patch(width: usize, height: usize, base: [u8; 3], amp: i32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RgbImage::from_fn(width, height, |_, _| jitter(&mut rng, base, amp)).expect("positive dimensions")
}

/// Left half gray, right half warm orange, both with mild noise.
pub fn two_patch(width: usize, height: usize, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let split = width / 2;
    RgbImage::from_fn(width, height, |x, _| jitter(&mut rng, if x < split { GRAY } else { WARM }, 6))
        .expect("positive dimensions")
}

/// Recolor the right patch of [`two_patch`] from a cool blue target while
/// keeping the left patch.
pub fn two_patch_job(width: usize, height: usize, seed: u64) -> TransferJob {
    let source = two_patch(width, height, seed);
    let target = noisy_patch(40, 30, COOL, 10, seed ^ 0x5eed);
    let split = width / 2;
    let set = CorrespondenceSet::new(
        vec![Correspondence {
            source_region: RegionMask::rect(width, height, split, 0, width, height),
            target_id: "cool".into(),
            target_region: RegionMask::rect(40, 30, 0, 0, 40, 30),
        }],
        vec![RegionMask::rect(width, height, 0, 0, split, height)],
    );
    TransferJob {
        source,
        targets: BTreeMap::from([("cool".to_string(), target)]),
        set,
        config: PipelineConfig::default(),
    }
}

/// Smooth multi-hue scene: a sky-to-ground gradient with three shaded
/// disks, plus pixel noise. Has many distinct colors.
pub fn scene(width: usize, height: usize, palette: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(palette);
    let hue = |rng: &mut ChaCha8Rng| -> [f64; 3] { std::array::from_fn(|_| rng.random_range(40.0..220.0)) };
    let sky = hue(&mut rng);
    let ground = hue(&mut rng);
    let disks: Vec<([f64; 2], f64, [f64; 3])> = (0..3)
        .map(|i| {
            let cx = (0.2 + 0.3 * i as f64) * width as f64;
            let cy = (0.45 + 0.15 * ((i % 2) as f64)) * height as f64;
            let r = 0.16 * width.min(height) as f64 * (1.0 + 0.3 * i as f64);
            ([cx, cy], r, hue(&mut rng))
        })
        .collect();
    RgbImage::from_fn(width, height, |x, y| {
        let fy = y as f64 / height.max(2) as f64;
        let fx = x as f64 / width.max(2) as f64;
        let mut c: [f64; 3] = std::array::from_fn(|k| sky[k] * (1.0 - fy) + ground[k] * fy + 20.0 * (fx - 0.5));
        for (center, r, col) in &disks {
            let d = ((x as f64 - center[0]).powi(2) + (y as f64 - center[1]).powi(2)).sqrt() / r;
            if d < 1.0 {
                let shade = 1.0 - 0.35 * d * d;
                c = std::array::from_fn(|k| col[k] * shade);
            }
        }
        std::array::from_fn(|k| (c[k] + rng.random_range(-4.0..4.0)).round().clamp(0.0, 255.0) as u8)
    })
    .expect("positive dimensions")
}

/// Closed polygon approximating an ellipse.
pub fn ellipse_path(cx: f64, cy: f64, rx: f64, ry: f64, segments: usize) -> Vec<PathPoint> {
    (0..segments)
        .map(|i| {
            let t = i as f64 / segments as f64 * std::f64::consts::TAU;
            [cx + rx * t.cos(), cy + ry * t.sin()]
        })
        .collect()
}

/// Identity transfer: one region paired with the same region of an exact
/// copy of the source, so the transferred colors equal the originals.
pub fn identity_job(width: usize, height: usize, seed: u64) -> TransferJob {
    let source = scene(width, height, seed);
    let region = RegionMask::rect(width, height, width / 4, height / 4, 3 * width / 4, 3 * height / 4);
    TransferJob {
        targets: BTreeMap::from([("self".to_string(), source.clone())]),
        set: CorrespondenceSet::new(
            vec![Correspondence {
                source_region: region.clone(),
                target_id: "self".into(),
                target_region: region,
            }],
            vec![],
        ),
        source,
        config: PipelineConfig::default(),
    }
}

/// The benchmark configuration: a 1024×686 source, targets of 1024×768
/// and 301×220, two freehand-style correspondences and one keep region.
pub fn large_job(seed: u64) -> TransferJob {
    let (w, h) = (1024, 686);
    let source = scene(w, h, seed);
    let big = scene(1024, 768, seed + 101);
    let small = scene(301, 220, seed + 202);
    let disk = |i: usize| {
        let cx = (0.2 + 0.3 * i as f64) * w as f64;
        let cy = (0.45 + 0.15 * ((i % 2) as f64)) * h as f64;
        (cx, cy, 0.16 * h as f64 * (1.0 + 0.3 * i as f64))
    };
    let (c0x, c0y, r0) = disk(0);
    let (c1x, c1y, r1) = disk(1);
    let src0 = rasterize_closed_path(&ellipse_path(c0x, c0y, 0.7 * r0, 0.5 * r0, 48), w, h).expect("inside canvas");
    let src1 = rasterize_closed_path(&ellipse_path(c1x, c1y, 0.6 * r1, 0.6 * r1, 48), w, h).expect("inside canvas");
    let keep = RegionMask::rect(w, h, 0, 0, w, h / 8);
    let set = CorrespondenceSet::new(
        vec![
            Correspondence {
                source_region: src0,
                target_id: "large".into(),
                target_region: RegionMask::rect(1024, 768, 100, 300, 320, 460),
            },
            Correspondence {
                source_region: src1,
                target_id: "small".into(),
                target_region: RegionMask::rect(301, 220, 20, 10, 140, 80),
            },
        ],
        vec![keep],
    );
    TransferJob {
        source,
        targets: BTreeMap::from([("large".to_string(), big), ("small".to_string(), small)]),
        set,
        config: PipelineConfig::default(),
    }
}

/// `width·height` pairwise distinct colors (at most 2²⁴ pixels).
pub fn distinct_colors(width: usize, height: usize) -> RgbImage {
    assert!(width * height <= 1 << 24, "not enough colors");
    RgbImage::from_fn(width, height, |x, y| {
        // Odd multiplier: a bijection on 24-bit integers.
        let v = ((y * width + x) as u64).wrapping_mul(0x9E3779B1) & 0xFF_FFFF;
        [(v >> 16) as u8, (v >> 8) as u8, v as u8]
    })
    .expect("positive dimensions")
}

/// Mean RGB of `img` over `mask`, in 0..=255 units.
pub fn region_mean_rgb(img: &RgbImage, mask: &RegionMask) -> [f64; 3] {
    let mut acc = [0.0; 3];
    let mut n = 0usize;
    for i in mask.indices() {
        let p = img.pixels()[i];
        for c in 0..3 {
            acc[c] += p[c] as f64;
        }
        n += 1;
    }
    acc.map(|v| v / n.max(1) as f64)
}
