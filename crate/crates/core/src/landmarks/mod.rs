//! Landmark sub-sampling.
//!
//! A random subset of pixels is solved for directly. Every other pixel is
//! expressed as a barycentric combination of the landmarks whose colors
//! span the tetrahedron containing its own color, so the solved landmark
//! values can be interpolated back to the full image.

pub mod delaunay;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::colorspace::LabImage;
use crate::error::{Error, Result};
use crate::stats::ConstraintField;

pub use delaunay::{Location, Triangulation};

/// Color-space dimension the landmarks are triangulated in.
pub const DIM: usize = 3;
/// Smallest landmark set (when the image has enough distinct colors).
pub const MIN_LANDMARKS: usize = DIM + 2;

const LOCATE_CHUNK: usize = 4096;

/// How a pixel's value is recovered from landmark values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Assignment {
    /// The pixel's color is exactly landmark `0`'s color.
    Landmark(u32),
    /// Barycentric combination over a tetrahedron of landmarks.
    Interpolated {
        simplex: u32,
        landmarks: [u32; 4],
        coefficients: [f64; 4],
    },
}

/// Sub-sampled landmark set for one image.
#[derive(Debug, Clone)]
pub struct LandmarkSet {
    beta: f64,
    seed: u64,
    eta: Vec<usize>,
    colors: Vec<[f64; 3]>,
    simplices: Vec<[u32; 4]>,
    assignment: Vec<Assignment>,
    extrapolated: usize,
    hull_additions: usize,
}

fn color_key(c: &[f64; 3]) -> [u64; 3] {
    c.map(f64::to_bits)
}

/// Seeded landmark selection. Returns sorted pixel indices with pairwise
/// distinct colors.
pub fn select_landmarks(img: &LabImage, beta: f64, seed: u64) -> Result<Vec<usize>> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::BetaOutOfRange(beta));
    }
    let n = img.len();
    let count = ((beta * n as f64).round() as usize).clamp(1, n);
    let mut sample: Vec<usize> = if count == n {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, n, count).into_vec()
    };
    sample.sort_unstable();

    let mut seen = std::collections::HashSet::with_capacity(sample.len() + 8);
    let mut eta = Vec::with_capacity(sample.len() + 8);
    for i in sample {
        if seen.insert(color_key(&img.color(i))) {
            eta.push(i);
        }
    }
    for i in extremal_pixels(img) {
        if seen.insert(color_key(&img.color(i))) {
            eta.push(i);
        }
    }
    if eta.len() < MIN_LANDMARKS {
        for i in 0..n {
            if eta.len() >= MIN_LANDMARKS {
                break;
            }
            if seen.insert(color_key(&img.color(i))) {
                eta.push(i);
            }
        }
    }
    eta.sort_unstable();
    Ok(eta)
}

/// Pixels extremal along ±l, ±α, ±β and ±(l+α+β). Ties go to the lowest
/// pixel index.
pub fn extremal_pixels(img: &LabImage) -> [usize; 8] {
    let project = |i: usize, dir: usize| -> f64 {
        let c = img.color(i);
        if dir < 3 {
            c[dir]
        } else {
            c[0] + c[1] + c[2]
        }
    };
    let mut out = [0usize; 8];
    for dir in 0..4 {
        let (mut lo, mut hi) = (0usize, 0usize);
        for i in 1..img.len() {
            let v = project(i, dir);
            if v < project(lo, dir) {
                lo = i;
            }
            if v > project(hi, dir) {
                hi = i;
            }
        }
        out[2 * dir] = hi;
        out[2 * dir + 1] = lo;
    }
    out
}

impl LandmarkSet {
    /// Selects landmarks, triangulates their colors and assigns every
    /// pixel. Distinct colors outside the landmark hull are promoted to
    /// landmarks so no pixel has to be extrapolated.
    pub fn build(img: &LabImage, beta: f64, seed: u64) -> Result<Self> {
        let eta = select_landmarks(img, beta, seed)?;
        Self::from_indices(img, eta, beta, seed)
    }

    /// Builds the set from explicit landmark pixel indices (distinct
    /// colors assumed; later duplicates are ignored).
    pub fn from_indices(img: &LabImage, mut eta: Vec<usize>, beta: f64, seed: u64) -> Result<Self> {
        eta.sort_unstable();
        eta.dedup();
        let mut index: HashMap<[u64; 3], usize> = HashMap::with_capacity(eta.len());
        eta.retain(|&i| {
            let key = color_key(&img.color(i));
            if index.contains_key(&key) {
                false
            } else {
                index.insert(key, i);
                true
            }
        });
        if eta.is_empty() {
            return Err(Error::EmptyIndexSet);
        }

        // Distinct colors that are not landmark colors, keyed to the first
        // pixel carrying them.
        let mut queries: Vec<([f64; 3], usize)> = Vec::new();
        let mut query_of: HashMap<[u64; 3], usize> = HashMap::new();
        for i in 0..img.len() {
            let c = img.color(i);
            let key = color_key(&c);
            if !index.contains_key(&key) && !query_of.contains_key(&key) {
                query_of.insert(key, queries.len());
                queries.push((c, i));
            }
        }

        let mut hull_additions = 0;
        let mut simplices = Vec::new();
        let mut located: Vec<Location> = Vec::new();
        let mut vertex_pixel: Vec<usize> = eta.clone();

        if !queries.is_empty() {
            let points: Vec<[f64; 3]> = eta.iter().map(|&i| img.color(i)).collect();
            let mut tri = Triangulation::new(&points)?;

            let qpoints: Vec<[f64; 3]> = queries.iter().map(|q| q.0).collect();
            let order = delaunay::spatial_order(&qpoints);
            let outside: Vec<usize> = {
                let tri = &tri;
                order
                    .par_chunks(LOCATE_CHUNK)
                    .flat_map_iter(|chunk| {
                        let mut loc = tri.locator();
                        chunk
                            .iter()
                            .copied()
                            .filter(|&q| loc.is_outside(&qpoints[q]))
                            .collect::<Vec<_>>()
                    })
                    .collect()
            };
            if !outside.is_empty() {
                let mut added: Vec<usize> = outside;
                added.sort_unstable();
                let pts: Vec<[f64; 3]> = added.iter().map(|&q| qpoints[q]).collect();
                tri.insert_many(&pts);
                vertex_pixel.extend(added.iter().map(|&q| queries[q].1));
                hull_additions = added.len();
                for &q in &added {
                    index.insert(color_key(&qpoints[q]), queries[q].1);
                }
            }

            let tri = &tri;
            let mut results: Vec<(usize, Location)> = order
                .par_chunks(LOCATE_CHUNK)
                .flat_map_iter(|chunk| {
                    let mut loc = tri.locator();
                    chunk
                        .iter()
                        .copied()
                        .filter(|&q| !index.contains_key(&color_key(&qpoints[q])))
                        .map(|q| (q, loc.locate(&qpoints[q])))
                        .collect::<Vec<_>>()
                })
                .collect();
            results.sort_unstable_by_key(|r| r.0);
            located = vec![
                Location {
                    simplex: 0,
                    coefficients: [0.0; 4],
                    extrapolated: false,
                };
                queries.len()
            ];
            for (q, l) in results {
                located[q] = l;
            }
            simplices = tri.simplices();
        }

        // Final landmark order: ascending pixel index.
        let mut eta: Vec<usize> = vertex_pixel.clone();
        eta.sort_unstable();
        let position: HashMap<usize, u32> = eta.iter().enumerate().map(|(j, &p)| (p, j as u32)).collect();
        let vertex_to_landmark: Vec<u32> = vertex_pixel.iter().map(|p| position[p]).collect();
        let colors: Vec<[f64; 3]> = eta.iter().map(|&i| img.color(i)).collect();
        let simplices: Vec<[u32; 4]> = simplices
            .iter()
            .map(|s| s.map(|v| vertex_to_landmark[v]))
            .collect();

        let landmark_of: HashMap<[u64; 3], u32> = eta
            .iter()
            .enumerate()
            .map(|(j, &p)| (color_key(&img.color(p)), j as u32))
            .collect();
        let mut extrapolated = 0;
        let per_query: Vec<Option<Assignment>> = queries
            .iter()
            .enumerate()
            .map(|(q, (c, _))| {
                if landmark_of.contains_key(&color_key(c)) {
                    return None;
                }
                let l = &located[q];
                Some(Assignment::Interpolated {
                    simplex: l.simplex as u32,
                    landmarks: simplices[l.simplex],
                    coefficients: l.coefficients,
                })
            })
            .collect();
        for (q, a) in per_query.iter().enumerate() {
            if a.is_some() && located[q].extrapolated {
                extrapolated += 1;
            }
        }
        let assignment: Vec<Assignment> = (0..img.len())
            .into_par_iter()
            .map(|i| {
                let key = color_key(&img.color(i));
                match landmark_of.get(&key) {
                    Some(&j) => Assignment::Landmark(j),
                    None => per_query[query_of[&key]].expect("non-landmark color was located"),
                }
            })
            .collect();

        Ok(LandmarkSet {
            beta,
            seed,
            eta,
            colors,
            simplices,
            assignment,
            extrapolated,
            hull_additions,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Landmark pixel indices, ascending.
    pub fn eta(&self) -> &[usize] {
        &self.eta
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn pixel_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn colors(&self) -> &[[f64; 3]] {
        &self.colors
    }

    /// Tetrahedra as landmark positions (indices into [`Self::eta`]).
    /// Empty when every pixel color is a landmark color.
    pub fn simplices(&self) -> &[[u32; 4]] {
        &self.simplices
    }

    pub fn assignment(&self, pixel: usize) -> &Assignment {
        &self.assignment[pixel]
    }

    pub fn assignments(&self) -> &[Assignment] {
        &self.assignment
    }

    /// Distinct colors that fell outside the hull and were extrapolated.
    pub fn extrapolated_count(&self) -> usize {
        self.extrapolated
    }

    /// Landmarks added beyond the random sample and extremal pixels to
    /// close the hull.
    pub fn hull_additions(&self) -> usize {
        self.hull_additions
    }

    /// Interpolates landmark values (one per landmark) to every pixel.
    pub fn reconstruct(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.eta.len(), "one value per landmark");
        self.assignment
            .par_iter()
            .map(|a| match *a {
                Assignment::Landmark(j) => values[j as usize],
                Assignment::Interpolated {
                    landmarks, coefficients, ..
                } => (0..4).map(|v| coefficients[v] * values[landmarks[v] as usize]).sum(),
            })
            .collect()
    }

    /// Spreads pixel constraints onto landmarks: a constrained pixel adds
    /// `λ·L_j` to the diagonal and `λ·L_j·t` to the right-hand side of each
    /// landmark `j` it interpolates from (`L_j = 1` for landmarks).
    /// Negative coefficients are clamped to zero.
    pub fn redistribute(&self, field: &ConstraintField, lambda: f64) -> (Vec<f64>, [Vec<f64>; 3]) {
        assert_eq!(field.len(), self.assignment.len(), "constraint field size");
        let n = self.eta.len();
        let mut diag = vec![0.0; n];
        let mut rhs = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (i, t) in field.iter() {
            let mut push = |j: usize, w: f64| {
                diag[j] += lambda * w;
                for c in 0..3 {
                    rhs[c][j] += lambda * w * t[c];
                }
            };
            match self.assignment[i] {
                Assignment::Landmark(j) => push(j as usize, 1.0),
                Assignment::Interpolated {
                    landmarks, coefficients, ..
                } => {
                    for v in 0..4 {
                        let w = coefficients[v].max(0.0);
                        if w > 0.0 {
                            push(landmarks[v] as usize, w);
                        }
                    }
                }
            }
        }
        (diag, rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorspace::{rgb_to_lab, RgbImage};
    use rand::{Rng, SeedableRng};

    fn distinct_image(w: usize, h: usize) -> LabImage {
        let img = RgbImage::from_fn(w, h, |x, y| {
            let i = y * w + x;
            [(i % 256) as u8, ((i / 256) * 7 % 256) as u8, ((i * 13 + 5) % 256) as u8]
        })
        .unwrap();
        rgb_to_lab(&img)
    }

    fn noise_image(w: usize, h: usize, seed: u64) -> LabImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = RgbImage::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap();
        rgb_to_lab(&img)
    }

    #[test]
    fn beta_is_validated() {
        let img = noise_image(4, 4, 0);
        for b in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(select_landmarks(&img, b, 0), Err(Error::BetaOutOfRange(_))));
        }
    }

    #[test]
    fn full_beta_selects_every_distinct_color() {
        let img = distinct_image(10, 10);
        let eta = select_landmarks(&img, 1.0, 3).unwrap();
        assert_eq!(eta, (0..100).collect::<Vec<_>>());
        let set = LandmarkSet::build(&img, 1.0, 3).unwrap();
        assert!(set.simplices().is_empty());
        assert!(set.assignments().iter().enumerate().all(|(i, a)| *a == Assignment::Landmark(i as u32)));
    }

    #[test]
    fn constant_image_collapses_to_one_landmark() {
        let img = rgb_to_lab(&RgbImage::filled(6, 5, [40, 90, 200]).unwrap());
        for beta in [0.05, 0.5, 1.0] {
            let set = LandmarkSet::build(&img, beta, 1).unwrap();
            assert_eq!(set.len(), 1);
            let out = set.reconstruct(&[0.7]);
            assert!(out.iter().all(|&v| v == 0.7));
        }
    }

    #[test]
    fn sample_size_counts() {
        // 10,000 distinct colors.
        let img = distinct_image(100, 100);
        let a = select_landmarks(&img, 0.05, 11).unwrap();
        let b = select_landmarks(&img, 0.05, 11).unwrap();
        assert_eq!(a, b);
        assert!((500..=508).contains(&a.len()), "{}", a.len());
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        let c = select_landmarks(&img, 0.05, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn extremal_pixels_are_included() {
        let img = noise_image(40, 40, 2);
        let eta = select_landmarks(&img, 0.01, 0).unwrap();
        for e in extremal_pixels(&img) {
            let c = img.color(e);
            assert!(eta.iter().any(|&i| img.color(i) == c));
        }
    }

    #[test]
    fn landmark_colors_are_unique() {
        let img = rgb_to_lab(&RgbImage::from_fn(30, 30, |x, y| [(x / 3 * 20) as u8, (y / 3 * 20) as u8, 50]).unwrap());
        let set = LandmarkSet::build(&img, 0.3, 5).unwrap();
        let mut keys: Vec<_> = set.colors().iter().map(color_key).collect();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), set.len());
    }

    #[test]
    fn no_pixel_is_extrapolated_and_affine_functions_reproduce() {
        let img = noise_image(64, 48, 7);
        let set = LandmarkSet::build(&img, 0.05, 0).unwrap();
        assert_eq!(set.extrapolated_count(), 0);
        let f = |c: [f64; 3]| 0.3 * c[0] - 1.7 * c[1] + 2.1 * c[2] + 0.25;
        let values: Vec<f64> = set.colors().iter().map(|&c| f(c)).collect();
        let out = set.reconstruct(&values);
        for (i, v) in out.iter().enumerate() {
            assert!((v - f(img.color(i))).abs() < 1e-7, "pixel {i}");
        }
        for a in set.assignments() {
            if let Assignment::Interpolated { coefficients, .. } = a {
                assert!((coefficients.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reconstruct_matches_dense_dot_products() {
        let img = noise_image(32, 32, 8);
        let set = LandmarkSet::build(&img, 0.1, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let values: Vec<f64> = (0..set.len()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let out = set.reconstruct(&values);
        for (i, a) in set.assignments().iter().enumerate() {
            let expect = match *a {
                Assignment::Landmark(j) => values[j as usize],
                Assignment::Interpolated {
                    landmarks, coefficients, ..
                } => {
                    let mut s = 0.0;
                    for v in 0..4 {
                        s += coefficients[v] * values[landmarks[v] as usize];
                    }
                    s
                }
            };
            assert!((out[i] - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn build_is_deterministic() {
        let img = noise_image(50, 40, 1);
        let a = LandmarkSet::build(&img, 0.05, 4).unwrap();
        let b = LandmarkSet::build(&img, 0.05, 4).unwrap();
        assert_eq!(a.eta(), b.eta());
        assert_eq!(a.simplices(), b.simplices());
        assert_eq!(a.assignments(), b.assignments());
    }

    #[test]
    fn flat_color_cloud_is_degenerate() {
        // Gray ramp: all colors on the achromatic axis.
        let img = rgb_to_lab(&RgbImage::from_fn(20, 20, |x, y| [((x + y) * 6) as u8; 3]).unwrap());
        assert!(matches!(LandmarkSet::build(&img, 0.05, 0), Err(Error::DegenerateColorCloud)));
        assert!(LandmarkSet::build(&img, 1.0, 0).is_ok());
    }

    #[test]
    fn redistribution_weights() {
        let img = noise_image(16, 16, 3);
        let set = LandmarkSet::build(&img, 0.2, 0).unwrap();
        let mut field = ConstraintField::new(16, 16);
        let landmark_pixel = set.eta()[0];
        field.set(landmark_pixel, [1.0, 2.0, 3.0]);
        let other = (0..256).find(|i| !set.eta().contains(i)).unwrap();
        field.set(other, [4.0, 5.0, 6.0]);
        let (diag, rhs) = set.redistribute(&field, 10.0);
        let total: f64 = diag.iter().sum();
        assert!((total - 20.0).abs() < 1e-9);
        assert!(diag[0] >= 10.0);
        let Assignment::Interpolated { landmarks, coefficients, .. } = *set.assignment(other) else {
            panic!("non-landmark pixel must be interpolated");
        };
        for v in 0..4 {
            let j = landmarks[v] as usize;
            let base = if j == 0 { 10.0 } else { 0.0 };
            assert!((diag[j] - base - 10.0 * coefficients[v]).abs() < 1e-9);
        }
        let r0: f64 = rhs[0].iter().sum();
        assert!((r0 - (10.0 * 1.0 + 10.0 * 4.0)).abs() < 1e-9);
    }
}
