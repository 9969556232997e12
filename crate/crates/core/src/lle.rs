//! Locally linear reconstruction weights.
//!
//! Each sample is rebuilt from its k nearest neighbors with affine
//! weights (summing to one) that minimize the squared reconstruction
//! error. The rows form a sparse, row-stochastic matrix `W`.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::Result;
use crate::features::{Feature, FeatureSpace};

/// Tikhonov factor used when the local Gram matrix is rank deficient
/// (more neighbors than feature dimensions).
pub const REG_RANK_DEFICIENT: f64 = 1e-3;
/// Tikhonov factor otherwise; only guards exact degeneracy.
pub const REG_FULL_RANK: f64 = 1e-9;

/// Regularization factor for `k` neighbors in `dim` dimensions.
pub fn regularization(k: usize, dim: usize) -> f64 {
    if k > dim {
        REG_RANK_DEFICIENT
    } else {
        REG_FULL_RANK
    }
}

/// Local Gram matrix `G[j][m] = (x - x_j)·(x - x_m)`, row-major `k × k`.
pub fn local_gram(x: &[f64], neighbors: &[&[f64]]) -> Vec<f64> {
    let k = neighbors.len();
    let diffs: Vec<Vec<f64>> = neighbors
        .iter()
        .map(|n| x.iter().zip(n.iter()).map(|(a, b)| a - b).collect())
        .collect();
    let mut g = vec![0.0; k * k];
    for j in 0..k {
        for m in j..k {
            let v: f64 = diffs[j].iter().zip(&diffs[m]).map(|(a, b)| a * b).sum();
            g[j * k + m] = v;
            g[m * k + j] = v;
        }
    }
    g
}

/// Affine weights reconstructing `x` from `neighbors`.
///
/// Solves `(G + δ·tr(G)·I) w = 1` and rescales `w` to sum to one. When the
/// Gram trace is zero (every neighbor coincides with `x`) the weights are
/// uniform. Weights may be negative.
pub fn solve_weights(x: &[f64], neighbors: &[&[f64]]) -> Vec<f64> {
    let k = neighbors.len();
    assert!(k >= 1, "need at least one neighbor");
    let uniform = || vec![1.0 / k as f64; k];
    let mut g = local_gram(x, neighbors);
    let trace: f64 = (0..k).map(|j| g[j * k + j]).sum();
    if !(trace > 0.0 && trace.is_finite()) {
        return uniform();
    }
    let reg = regularization(k, x.len()) * trace;
    for j in 0..k {
        g[j * k + j] += reg;
    }
    let Some(mut w) = solve_spd(&g, k) else {
        return uniform();
    };
    let sum: f64 = w.iter().sum();
    if !(sum.is_finite() && sum != 0.0) {
        return uniform();
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Solves `A w = 1` for symmetric positive definite `A` (row-major `k × k`)
/// by Cholesky, falling back to partially pivoted elimination.
fn solve_spd(a: &[f64], k: usize) -> Option<Vec<f64>> {
    cholesky_solve_ones(a, k).or_else(|| gauss_solve_ones(a, k))
}

fn cholesky_solve_ones(a: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for p in 0..j {
                s -= l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    let mut y = vec![1.0; k];
    for i in 0..k {
        let mut s = y[i];
        for p in 0..i {
            s -= l[i * k + p] * y[p];
        }
        y[i] = s / l[i * k + i];
    }
    for i in (0..k).rev() {
        let mut s = y[i];
        for p in i + 1..k {
            s -= l[p * k + i] * y[p];
        }
        y[i] = s / l[i * k + i];
    }
    Some(y)
}

fn gauss_solve_ones(a: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut b = vec![1.0; k];
    for col in 0..k {
        let pivot = (col..k).max_by(|&r, &s| m[r * k + col].abs().total_cmp(&m[s * k + col].abs()))?;
        if m[pivot * k + col] == 0.0 {
            return None;
        }
        if pivot != col {
            for c in 0..k {
                m.swap(pivot * k + c, col * k + c);
            }
            b.swap(pivot, col);
        }
        for r in col + 1..k {
            let f = m[r * k + col] / m[col * k + col];
            for c in col..k {
                m[r * k + c] -= f * m[col * k + c];
            }
            b[r] -= f * b[col];
        }
    }
    for r in (0..k).rev() {
        let mut s = b[r];
        for c in r + 1..k {
            s -= m[r * k + c] * b[c];
        }
        b[r] = s / m[r * k + r];
    }
    b.iter().all(|v| v.is_finite()).then_some(b)
}

/// Weighted reconstruction error `‖x - Σ w_j x_j‖²`.
pub fn reconstruction_error(x: &[f64], neighbors: &[&[f64]], weights: &[f64]) -> f64 {
    let mut err = 0.0;
    for d in 0..x.len() {
        let mut r = x[d];
        for (n, w) in neighbors.iter().zip(weights) {
            r -= w * n[d];
        }
        err += r * r;
    }
    err
}

/// Borrowed view of one row of the weight matrix.
#[derive(Debug, Clone, Copy)]
pub struct LleRow<'a> {
    pub point_index: usize,
    pub neighbor_indices: &'a [usize],
    pub weights: &'a [f64],
}

/// Sparse row-stochastic weight matrix with a fixed number of entries
/// per row, rows in sample order.
#[derive(Debug, Clone, PartialEq)]
pub struct LleGraph {
    n: usize,
    k: usize,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
}

impl LleGraph {
    /// Builds a graph from explicit rows. Every row must have `k` entries.
    pub fn from_rows(n: usize, k: usize, rows: Vec<(Vec<usize>, Vec<f64>)>) -> Self {
        assert_eq!(rows.len(), n, "one row per sample");
        let mut neighbors = Vec::with_capacity(n * k);
        let mut weights = Vec::with_capacity(n * k);
        for (cols, vals) in rows {
            assert!(cols.len() == k && vals.len() == k, "row width must be k");
            neighbors.extend(cols);
            weights.extend(vals);
        }
        Self {
            n,
            k,
            neighbors,
            weights,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> LleRow<'_> {
        let span = i * self.k..(i + 1) * self.k;
        LleRow {
            point_index: i,
            neighbor_indices: &self.neighbors[span.clone()],
            weights: &self.weights[span],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = LleRow<'_>> {
        (0..self.n).map(move |i| self.row(i))
    }

    /// `(W v)_i = Σ_j w_ij v_j`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let r = self.row(i);
                r.neighbor_indices
                    .iter()
                    .zip(r.weights)
                    .map(|(&j, &w)| w * v[j])
                    .sum()
            })
            .collect()
    }

    /// Coordinate-list dump, one `row col weight` triple per line.
    pub fn write_coo(&self, mut out: impl Write) -> io::Result<()> {
        for r in self.rows() {
            for (&j, &w) in r.neighbor_indices.iter().zip(r.weights) {
                writeln!(out, "{} {} {}", r.point_index, j, w)?;
            }
        }
        Ok(())
    }
}

/// One row per sample: neighbors from the exact k-NN query and weights
/// from [`solve_weights`].
pub fn build_graph(space: &FeatureSpace, k: usize) -> Result<LleGraph> {
    let neighbor_lists = space.knn_all(k)?;
    let points = space.points();
    let rows: Vec<(Vec<usize>, Vec<f64>)> = neighbor_lists
        .into_par_iter()
        .enumerate()
        .map(|(i, nbrs)| {
            let x: &Feature = &points[i].feature;
            let feats: Vec<&[f64]> = nbrs.iter().map(|n| &points[n.point].feature[..]).collect();
            let w = solve_weights(x, &feats);
            (nbrs.iter().map(|n| n.point).collect(), w)
        })
        .collect();
    debug_assert!(rows.iter().all(|(c, _)| c.len() == k));
    Ok(LleGraph::from_rows(space.len(), k, rows))
}
