//! Propagation solve: minimize
//! `Σ_i (s_i − Σ_j w_ij s_j)² + Σ_i Λ_ii (s_i − t_i)²`
//! per channel, i.e. `[(I−W)ᵀ(I−W) + Λ] s = Λ t`, with Jacobi-preconditioned
//! conjugate gradients. The matrix is never formed; only the transpose
//! of `W` is precomputed so both products are parallel gathers.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lle::LleGraph;

pub const DEFAULT_LAMBDA: f64 = 100.0;
pub const DEFAULT_TOL: f64 = 1e-6;

const CHUNK: usize = 4096;

/// Deterministic parallel dot product: fixed chunking, ordered reduction.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect::<Vec<f64>>()
        .into_iter()
        .sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `10·√n`, the default iteration cap.
pub fn default_max_iter(n: usize) -> usize {
    ((10.0 * (n as f64).sqrt()).ceil() as usize).max(10)
}

/// Column-major view of `W`: for each sample `j`, the rows that use it.
#[derive(Debug, Clone)]
struct Transpose {
    offsets: Vec<usize>,
    rows: Vec<usize>,
    weights: Vec<f64>,
}

impl Transpose {
    fn of(graph: &LleGraph) -> Self {
        let n = graph.n();
        let mut counts = vec![0usize; n + 1];
        for r in graph.rows() {
            for &j in r.neighbor_indices {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let mut cursor = counts.clone();
        let nnz = counts[n];
        let mut rows = vec![0; nnz];
        let mut weights = vec![0.0; nnz];
        for r in graph.rows() {
            for (&j, &w) in r.neighbor_indices.iter().zip(r.weights) {
                rows[cursor[j]] = r.point_index;
                weights[cursor[j]] = w;
                cursor[j] += 1;
            }
        }
        Self {
            offsets: counts,
            rows,
            weights,
        }
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[j]..self.offsets[j + 1];
        self.rows[span.clone()].iter().copied().zip(self.weights[span].iter().copied())
    }
}

/// `A = (I−W)ᵀ(I−W) + Λ` and the per-channel right-hand sides `Λt`.
#[derive(Debug, Clone)]
pub struct PropagationSystem<'g> {
    graph: &'g LleGraph,
    transpose: Transpose,
    lambda_diag: Vec<f64>,
    rhs: [Vec<f64>; 3],
    lambda: f64,
}

/// Outcome of a three-channel solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: [Vec<f64>; 3],
    pub iterations: [usize; 3],
    pub relative_residual: [f64; 3],
    pub energy: [f64; 3],
    pub converged: [bool; 3],
}

impl SolveReport {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}

/// Single-channel CG result.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSolve {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Builds the system for per-sample constraints: constrained samples get
/// `Λ_ii = λ` and `rhs_i = λ t_i`.
pub fn assemble<'g>(
    graph: &'g LleGraph,
    constraints: &[Option<[f64; 3]>],
    lambda: f64,
) -> Result<PropagationSystem<'g>> {
    if constraints.len() != graph.n() {
        return Err(Error::InvalidConfig(format!(
            "{} constraints for {} samples",
            constraints.len(),
            graph.n()
        )));
    }
    let n = graph.n();
    let mut diag = vec![0.0; n];
    let mut rhs = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (i, t) in constraints.iter().enumerate() {
        if let Some(t) = t {
            diag[i] = lambda;
            for c in 0..3 {
                rhs[c][i] = lambda * t[c];
            }
        }
    }
    PropagationSystem::from_parts(graph, diag, rhs, lambda)
}

impl<'g> PropagationSystem<'g> {
    /// Builds a system from an explicit `Λ` diagonal and `Λt` vectors, as
    /// produced by landmark constraint redistribution.
    pub fn from_parts(graph: &'g LleGraph, lambda_diag: Vec<f64>, rhs: [Vec<f64>; 3], lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
        }
        let n = graph.n();
        if lambda_diag.len() != n || rhs.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidConfig("system vectors do not match sample count".into()));
        }
        if lambda_diag.iter().any(|&d| !(d >= 0.0 && d.is_finite())) {
            return Err(Error::InvalidConfig("constraint weights must be finite and nonnegative".into()));
        }
        if !lambda_diag.iter().any(|&d| d > 0.0) {
            return Err(Error::Unconstrained);
        }
        let mut rhs = rhs;
        for c in rhs.iter_mut() {
            for (r, &d) in c.iter_mut().zip(&lambda_diag) {
                if d == 0.0 {
                    *r = 0.0;
                }
            }
        }
        Ok(Self {
            graph,
            transpose: Transpose::of(graph),
            lambda_diag,
            rhs,
            lambda,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn graph(&self) -> &LleGraph {
        self.graph
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lambda_diag(&self) -> &[f64] {
        &self.lambda_diag
    }

    pub fn rhs(&self) -> &[Vec<f64>; 3] {
        &self.rhs
    }

    /// `(I−W) v`.
    pub fn residual_map(&self, v: &[f64]) -> Vec<f64> {
        let g = self.graph;
        (0..g.n())
            .into_par_iter()
            .map(|i| {
                let r = g.row(i);
                v[i] - r.neighbor_indices.iter().zip(r.weights).map(|(&j, &w)| w * v[j]).sum::<f64>()
            })
            .collect()
    }

    /// `(I−W)ᵀ u`.
    fn residual_map_t(&self, u: &[f64]) -> Vec<f64> {
        (0..self.n())
            .into_par_iter()
            .map(|j| u[j] - self.transpose.column(j).map(|(i, w)| w * u[i]).sum::<f64>())
            .collect()
    }

    /// `A v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let u = self.residual_map(v);
        let mut y = self.residual_map_t(&u);
        y.par_iter_mut()
            .zip(&self.lambda_diag)
            .zip(v)
            .for_each(|((y, &d), &x)| *y += d * x);
        y
    }

    /// `diag(A)_j = 1 + Σ_i w_ij² + Λ_jj` (rows never reference themselves).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n())
            .into_par_iter()
            .map(|j| {
                let self_weight: f64 = self
                    .graph
                    .row(j)
                    .neighbor_indices
                    .iter()
                    .zip(self.graph.row(j).weights)
                    .filter(|(&c, _)| c == j)
                    .map(|(_, &w)| w)
                    .sum();
                let col: f64 = self
                    .transpose
                    .column(j)
                    .filter(|&(i, _)| i != j)
                    .map(|(_, w)| w * w)
                    .sum();
                (1.0 - self_weight).powi(2) + col + self.lambda_diag[j]
            })
            .collect()
    }

    /// Dense `A`, for verification on small systems.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        let mut m = nalgebra::DMatrix::<f64>::identity(n, n);
        for r in self.graph.rows() {
            for (&j, &w) in r.neighbor_indices.iter().zip(r.weights) {
                m[(r.point_index, j)] -= w;
            }
        }
        let mut a = m.transpose() * m;
        for (j, &d) in self.lambda_diag.iter().enumerate() {
            a[(j, j)] += d;
        }
        a
    }

    /// Per-sample target implied by the system, `rhs / Λ` (0 where free).
    pub fn targets(&self, channel: usize) -> Vec<f64> {
        self.rhs[channel]
            .iter()
            .zip(&self.lambda_diag)
            .map(|(&r, &d)| if d > 0.0 { r / d } else { 0.0 })
            .collect()
    }

    /// `‖(I−W)s‖² + Σ_j Λ_jj (s_j − rhs_j/Λ_jj)²`.
    pub fn energy(&self, channel: usize, s: &[f64]) -> f64 {
        let u = self.residual_map(s);
        let t = self.targets(channel);
        let fit: Vec<f64> = s
            .iter()
            .zip(&t)
            .zip(&self.lambda_diag)
            .map(|((&s, &t), &d)| d * (s - t) * (s - t))
            .collect();
        dot(&u, &u) + fit.iter().sum::<f64>()
    }

    /// `2[(I−W)ᵀ(I−W)s + Λs − Λt]`.
    pub fn gradient(&self, channel: usize, s: &[f64]) -> Vec<f64> {
        let a = self.apply(s);
        a.iter().zip(&self.rhs[channel]).map(|(&a, &b)| 2.0 * (a - b)).collect()
    }

    /// Solves one channel from `initial`.
    pub fn solve_channel(&self, channel: usize, initial: &[f64], tol: f64, max_iter: usize) -> ChannelSolve {
        pcg(self, &self.rhs[channel], &self.diagonal(), initial, tol, max_iter)
    }

    /// Solves all three channels concurrently.
    pub fn solve(&self, initial: &[Vec<f64>; 3], tol: f64, max_iter: usize) -> SolveReport {
        let precond = self.diagonal();
        let runs: Vec<ChannelSolve> = (0..3)
            .into_par_iter()
            .map(|c| pcg(self, &self.rhs[c], &precond, &initial[c], tol, max_iter))
            .collect();
        let energy: [f64; 3] = std::array::from_fn(|c| self.energy(c, &runs[c].solution));
        let mut runs = runs.into_iter();
        let [a, b, c] = [runs.next().unwrap(), runs.next().unwrap(), runs.next().unwrap()];
        SolveReport {
            iterations: [a.iterations, b.iterations, c.iterations],
            relative_residual: [a.relative_residual, b.relative_residual, c.relative_residual],
            converged: [a.converged, b.converged, c.converged],
            energy,
            solution: [a.solution, b.solution, c.solution],
        }
    }
}

fn pcg(
    system: &PropagationSystem<'_>,
    b: &[f64],
    diag: &[f64],
    initial: &[f64],
    tol: f64,
    max_iter: usize,
) -> ChannelSolve {
    assert_eq!(initial.len(), b.len(), "initial guess length");
    let bnorm = norm(b).max(1e-30);
    let mut x = initial.to_vec();
    let ax = system.apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut rel = norm(&r) / bnorm;
    let mut iterations = 0;
    if rel <= tol {
        return ChannelSolve {
            solution: x,
            iterations,
            relative_residual: rel,
            converged: true,
        };
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    while iterations < max_iter {
        iterations += 1;
        let ap = system.apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.par_iter_mut().zip(&ap).for_each(|(r, ap)| *r -= alpha * ap);
        rel = norm(&r) / bnorm;
        if rel <= tol {
            break;
        }
        z.par_iter_mut()
            .zip(&r)
            .zip(diag)
            .for_each(|((z, r), d)| *z = r / d);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.par_iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    // Report the true residual, not the recurrence.
    let ax = system.apply(&x);
    let true_rel = norm(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>()) / bnorm;
    ChannelSolve {
        solution: x,
        iterations,
        relative_residual: true_rel,
        converged: true_rel <= tol,
    }
}

/// Literal energy for one channel with direct per-sample constraints:
/// `Σ_i (s_i − Σ_j w_ij s_j)² + λ Σ_{i constrained} (s_i − t_i)²`.
pub fn energy(graph: &LleGraph, s: &[f64], constraints: &[Option<f64>], lambda: f64) -> f64 {
    let mut e = 0.0;
    for r in graph.rows() {
        let recon: f64 = r.neighbor_indices.iter().zip(r.weights).map(|(&j, &w)| w * s[j]).sum();
        let d = s[r.point_index] - recon;
        e += d * d;
    }
    for (i, t) in constraints.iter().enumerate() {
        if let Some(t) = t {
            e += lambda * (s[i] - t) * (s[i] - t);
        }
    }
    e
}
