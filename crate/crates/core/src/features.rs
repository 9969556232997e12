//! Joint color + position feature vectors and exact k-nearest-neighbor
//! queries over them.
//!
//! A feature is `(l, α, β, w·x/width, w·y/height)`: the color channels
//! unchanged, followed by the pixel position normalized by the image size
//! and scaled by the spatial weight `w`. Queries are exact and break
//! distance ties by the lower pixel index, so results never depend on the
//! tree layout.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::colorspace::LabImage;
use crate::error::{Error, Result};

pub const FEATURE_DIM: usize = 5;
/// Default weight of the normalized pixel position in the feature.
pub const DEFAULT_SPATIAL_WEIGHT: f64 = 0.5;

pub type Feature = [f64; FEATURE_DIM];

/// Point sets smaller than this are scanned directly.
const BRUTE_FORCE_BELOW: usize = 64;
const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePoint {
    pub feature: Feature,
    pub pixel_index: usize,
}

/// One neighbor returned by [`FeatureSpace::knn`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Index into [`FeatureSpace::points`].
    pub point: usize,
    pub pixel_index: usize,
    pub dist2: f64,
}

impl Neighbor {
    fn cmp_key(&self, other: &Neighbor) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.pixel_index.cmp(&other.pixel_index))
    }
}

#[inline]
pub fn dist2(a: &Feature, b: &Feature) -> f64 {
    let mut acc = 0.0;
    for d in 0..FEATURE_DIM {
        let diff = a[d] - b[d];
        acc += diff * diff;
    }
    acc
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// Static kd-tree over a slice of features.
#[derive(Debug, Clone)]
struct KdTree {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl KdTree {
    fn build(points: &[FeaturePoint]) -> Self {
        let mut tree = KdTree {
            nodes: Vec::new(),
            order: (0..points.len()).collect(),
        };
        if points.len() >= BRUTE_FORCE_BELOW {
            let n = points.len();
            tree.build_node(points, 0, n);
        }
        tree
    }

    fn build_node(&mut self, points: &[FeaturePoint], start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let slice = &mut self.order[start..end];
        let mut lo = [f64::INFINITY; FEATURE_DIM];
        let mut hi = [f64::NEG_INFINITY; FEATURE_DIM];
        for &i in slice.iter() {
            for d in 0..FEATURE_DIM {
                lo[d] = lo[d].min(points[i].feature[d]);
                hi[d] = hi[d].max(points[i].feature[d]);
            }
        }
        let dim = (0..FEATURE_DIM)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[dim] - lo[dim] <= 0.0 {
            // All coincident: nothing to split on.
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            points[a].feature[dim].total_cmp(&points[b].feature[dim])
        });
        let value = points[slice[mid]].feature[dim];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        // Left holds [start, start+mid) with coordinates <= value,
        // right holds the rest with coordinates >= value.
        let left = self.build_node(points, start, start + mid);
        let right = self.build_node(points, start + mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }
}

/// Sorted, capacity-bounded candidate list.
struct Candidates {
    k: usize,
    items: Vec<Neighbor>,
}

impl Candidates {
    fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn worst(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.k - 1].dist2
        }
    }

    fn offer(&mut self, candidate: Neighbor) {
        if self.items.len() == self.k
            && candidate.cmp_key(&self.items[self.k - 1]) != Ordering::Less
        {
            return;
        }
        let pos = self
            .items
            .partition_point(|n| n.cmp_key(&candidate) == Ordering::Less);
        self.items.insert(pos, candidate);
        self.items.truncate(self.k);
    }
}

/// Feature points plus an exact nearest-neighbor index over them.
#[derive(Debug, Clone)]
pub struct FeatureSpace {
    points: Vec<FeaturePoint>,
    spatial_weight: f64,
    tree: KdTree,
}

/// Feature vector of one pixel.
pub fn pixel_feature(img: &LabImage, pixel_index: usize, spatial_weight: f64) -> Feature {
    let (w, h) = img.dims();
    let x = (pixel_index % w) as f64;
    let y = (pixel_index / w) as f64;
    let [l, a, b] = img.color(pixel_index);
    [
        l,
        a,
        b,
        spatial_weight * x / w as f64,
        spatial_weight * y / h as f64,
    ]
}

/// One feature point per entry of `indices`, in that order.
pub fn build_features(img: &LabImage, indices: &[usize], spatial_weight: f64) -> Result<FeatureSpace> {
    if indices.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    if !(spatial_weight >= 0.0 && spatial_weight.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "spatial weight {spatial_weight} must be finite and non-negative"
        )));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= img.len()) {
        return Err(Error::InvalidImage(format!(
            "pixel index {bad} outside a {} pixel image",
            img.len()
        )));
    }
    let points = indices
        .iter()
        .map(|&i| FeaturePoint {
            feature: pixel_feature(img, i, spatial_weight),
            pixel_index: i,
        })
        .collect();
    Ok(FeatureSpace::from_points(points, spatial_weight))
}

impl FeatureSpace {
    pub fn from_points(points: Vec<FeaturePoint>, spatial_weight: f64) -> Self {
        let tree = KdTree::build(&points);
        Self {
            points,
            spatial_weight,
            tree,
        }
    }

    pub fn points(&self) -> &[FeaturePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spatial_weight(&self) -> f64 {
        self.spatial_weight
    }

    /// The `k` nearest points other than `query` itself, ascending by
    /// squared distance, ties broken by lower pixel index.
    pub fn knn(&self, query: usize, k: usize) -> Result<Vec<Neighbor>> {
        let max = self.points.len().saturating_sub(1);
        if k == 0 || k > max {
            return Err(Error::NeighborCountOutOfRange { k, max });
        }
        if query >= self.points.len() {
            return Err(Error::InvalidImage(format!("query point {query} out of range")));
        }
        let mut cand = Candidates::new(k);
        let q = &self.points[query].feature;
        if self.tree.nodes.is_empty() {
            for (i, p) in self.points.iter().enumerate() {
                if i != query {
                    cand.offer(Neighbor {
                        point: i,
                        pixel_index: p.pixel_index,
                        dist2: dist2(q, &p.feature),
                    });
                }
            }
        } else {
            self.search(0, q, query, &mut cand);
        }
        Ok(cand.items)
    }

    /// Neighbor lists for every point, computed in parallel.
    pub fn knn_all(&self, k: usize) -> Result<Vec<Vec<Neighbor>>> {
        (0..self.points.len())
            .into_par_iter()
            .map(|i| self.knn(i, k))
            .collect()
    }

    fn search(&self, node: usize, q: &Feature, query: usize, cand: &mut Candidates) {
        match self.tree.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.tree.order[start..end] {
                    if i == query {
                        continue;
                    }
                    let p = &self.points[i];
                    let d = dist2(q, &p.feature);
                    if d <= cand.worst() {
                        cand.offer(Neighbor {
                            point: i,
                            pixel_index: p.pixel_index,
                            dist2: d,
                        });
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, query, cand);
                // Equal distance can still win on the pixel-index tie rule.
                if diff * diff <= cand.worst() {
                    self.search(far, q, query, cand);
                }
            }
        }
    }
}
