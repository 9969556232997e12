//! End-to-end recoloring: convert, constrain, sub-sample, build the
//! weight graph, solve, reconstruct, convert back.
//!
//! The color-independent part of the work (landmarks and weight graph)
//! lives in [`PreparedSource`] so interactive callers can reuse it across
//! solves that only change the correspondences.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::colorspace::{lab_to_rgb, rgb_to_lab, LabImage, RgbImage};
use crate::error::{Error, Result};
use crate::features::build_features;
use crate::landmarks::LandmarkSet;
use crate::lle::{build_graph, LleGraph};
use crate::regions::{validate_set, CorrespondenceSet};
use crate::resample::{downscale_mask, downscale_rgb, fit_dims};
use crate::solver::{default_max_iter, PropagationSystem, SolveReport};
use crate::stats::{build_constraints, ConstraintField};

/// Smallest accepted preview size.
pub const MIN_PREVIEW_DIM: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub k: usize,
    pub beta: f64,
    pub lambda: f64,
    pub spatial_weight: f64,
    pub seed: u64,
    pub tol: f64,
    /// Conjugate-gradient cap; `10·√n` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 21,
            beta: 0.05,
            lambda: crate::solver::DEFAULT_LAMBDA,
            spatial_weight: crate::features::DEFAULT_SPATIAL_WEIGHT,
            seed: 0,
            tol: crate::solver::DEFAULT_TOL,
            max_iter: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::BetaOutOfRange(self.beta));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.spatial_weight >= 0.0 && self.spatial_weight.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "spatial_weight must be nonnegative, got {}",
                self.spatial_weight
            )));
        }
        if self.max_iter == Some(0) {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        Ok(())
    }

    /// The fields that determine the landmark set and weight graph.
    pub fn prepare_key(&self) -> PrepareKey {
        PrepareKey {
            beta: self.beta.to_bits(),
            seed: self.seed,
            k: self.k,
            spatial_weight: self.spatial_weight.to_bits(),
        }
    }
}

/// Cache key for [`PreparedSource`] (together with the source image).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrepareKey {
    beta: u64,
    seed: u64,
    k: usize,
    spatial_weight: u64,
}

/// A source image, its target images, the regions, and the settings.
#[derive(Debug, Clone)]
pub struct TransferJob {
    pub source: RgbImage,
    pub targets: BTreeMap<String, RgbImage>,
    pub set: CorrespondenceSet,
    pub config: PipelineConfig,
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub convert_ms: f64,
    pub constraints_ms: f64,
    pub landmarks_ms: f64,
    pub graph_ms: f64,
    pub solve_ms: f64,
    pub reconstruct_ms: f64,
    pub total_ms: f64,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Landmarks and weight graph for one source image.
#[derive(Debug, Clone)]
pub struct PreparedSource {
    lab: LabImage,
    landmarks: LandmarkSet,
    /// `None` when the image has a single distinct color.
    graph: Option<LleGraph>,
    k_used: usize,
    beta_used: f64,
    landmarks_ms: f64,
    graph_ms: f64,
}

impl PreparedSource {
    /// Selects landmarks and builds the weight graph over them. A flat
    /// color cloud falls back to using every distinct color; `k` is
    /// clamped when there are too few landmarks.
    pub fn new(lab: LabImage, config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let start = Instant::now();
        let (landmarks, beta_used) = match LandmarkSet::build(&lab, config.beta, config.seed) {
            Ok(set) => (set, config.beta),
            Err(Error::DegenerateColorCloud) if config.beta < 1.0 => {
                log::warn!("degenerate color cloud at beta = {}; solving on all distinct colors", config.beta);
                let set = LandmarkSet::build(&lab, 1.0, config.seed).map_err(|e| e.in_stage("landmarks"))?;
                (set, 1.0)
            }
            Err(e) => return Err(e.in_stage("landmarks")),
        };
        let landmarks_ms = ms(start);

        let start = Instant::now();
        let n = landmarks.len();
        let (graph, k_used) = if n < 2 {
            (None, 0)
        } else {
            let k = config.k.min(n - 1);
            if k < config.k {
                log::warn!("k = {} clamped to {} for {} landmarks", config.k, k, n);
            }
            let space = build_features(&lab, landmarks.eta(), config.spatial_weight).map_err(|e| e.in_stage("graph"))?;
            (Some(build_graph(&space, k).map_err(|e| e.in_stage("graph"))?), k)
        };
        let graph_ms = ms(start);
        Ok(Self {
            lab,
            landmarks,
            graph,
            k_used,
            beta_used,
            landmarks_ms,
            graph_ms,
        })
    }

    pub fn lab(&self) -> &LabImage {
        &self.lab
    }

    pub fn landmarks(&self) -> &LandmarkSet {
        &self.landmarks
    }

    pub fn graph(&self) -> Option<&LleGraph> {
        self.graph.as_ref()
    }

    pub fn k_used(&self) -> usize {
        self.k_used
    }

    pub fn beta_used(&self) -> f64 {
        self.beta_used
    }

    /// Time spent selecting and triangulating landmarks.
    pub fn landmarks_ms(&self) -> f64 {
        self.landmarks_ms
    }

    /// Time spent on neighbor search and weights.
    pub fn graph_ms(&self) -> f64 {
        self.graph_ms
    }

    /// Solves for a constraint field and reconstructs the full image.
    ///
    /// What is propagated is the color change, not the color: each
    /// constrained pixel contributes the offset `t − c` from its source
    /// color `c`, the system is solved for landmark offsets starting from
    /// zero (the unedited source), and every pixel receives its own color
    /// plus the interpolated offset. Unedited pixels therefore stay exact.
    /// `warm` seeds the solver with previous offsets (ignored if its
    /// length does not match).
    pub fn solve(&self, field: &ConstraintField, config: &PipelineConfig, warm: Option<&[Vec<f64>; 3]>) -> Result<Solved> {
        config.validate()?;
        if field.dims() != self.lab.dims() {
            return Err(Error::InvalidConfig("constraint field does not match the source".into()));
        }
        let start = Instant::now();
        let (w, h) = self.lab.dims();
        let mut offsets = ConstraintField::new(w, h);
        for (i, t) in field.iter() {
            let c = self.lab.color(i);
            offsets.set(i, [t[0] - c[0], t[1] - c[1], t[2] - c[2]]);
        }
        let (diag, rhs) = self.landmarks.redistribute(&offsets, config.lambda);
        let n = self.landmarks.len();
        let initial = match warm {
            Some(w) if w.iter().all(|c| c.len() == n) => w.clone(),
            _ => [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        };
        let report = match &self.graph {
            Some(graph) => {
                let system =
                    PropagationSystem::from_parts(graph, diag, rhs, config.lambda).map_err(|e| e.in_stage("solve"))?;
                let max_iter = config.max_iter.unwrap_or_else(|| default_max_iter(n));
                system.solve(&initial, config.tol, max_iter)
            }
            None => single_landmark(&diag, &rhs).map_err(|e| e.in_stage("solve"))?,
        };
        let solve_ms = ms(start);

        let start = Instant::now();
        let planes: [Vec<f64>; 3] = std::array::from_fn(|c| {
            let delta = self.landmarks.reconstruct(&report.solution[c]);
            self.lab.planes()[c].iter().zip(delta).map(|(s, d)| s + d).collect()
        });
        let lab = LabImage::new(w, h, planes).map_err(|e| e.in_stage("reconstruct"))?;
        let image = lab_to_rgb(&lab);
        let reconstruct_ms = ms(start);
        Ok(Solved {
            image,
            lab,
            report,
            solve_ms,
            reconstruct_ms,
        })
    }
}

/// With one landmark there is no graph: the minimizer is the
/// constraint-weighted mean.
fn single_landmark(diag: &[f64], rhs: &[Vec<f64>; 3]) -> Result<SolveReport> {
    if !(diag[0] > 0.0) {
        return Err(Error::Unconstrained);
    }
    let solution: [Vec<f64>; 3] = std::array::from_fn(|c| vec![rhs[c][0] / diag[0]]);
    Ok(SolveReport {
        solution,
        iterations: [0; 3],
        relative_residual: [0.0; 3],
        energy: [0.0; 3],
        converged: [true; 3],
    })
}

/// Result of [`PreparedSource::solve`].
#[derive(Debug, Clone)]
pub struct Solved {
    pub image: RgbImage,
    /// The result before quantization to 8 bits.
    pub lab: LabImage,
    pub report: SolveReport,
    pub solve_ms: f64,
    pub reconstruct_ms: f64,
}

/// Output of a pipeline run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub image: RgbImage,
    pub lab: LabImage,
    pub report: SolveReport,
    pub timings: Timings,
    pub landmark_count: usize,
    pub k_used: usize,
    pub beta_used: f64,
}

impl Outcome {
    /// One-line JSON summary of timings, residuals and counts.
    pub fn status_json(&self) -> serde_json::Value {
        serde_json::json!({
            "status": if self.report.all_converged() { "ok" } else { "nonconverged" },
            "width": self.image.width(),
            "height": self.image.height(),
            "landmarks": self.landmark_count,
            "k": self.k_used,
            "beta": self.beta_used,
            "iterations": self.report.iterations,
            "relative_residual": self.report.relative_residual,
            "energy": self.report.energy,
            "converged": self.report.converged,
            "timings": self.timings,
        })
    }
}

/// Validates the job's correspondence set against its images.
pub fn validate_job(job: &TransferJob) -> Result<CorrespondenceSet> {
    job.config.validate()?;
    let dims: HashMap<String, (usize, usize)> = job.targets.iter().map(|(k, v)| (k.clone(), v.dims())).collect();
    validate_set(job.set.clone(), job.source.dims(), &dims)
}

/// Converts the job's target images.
pub fn targets_lab(job: &TransferJob) -> HashMap<String, LabImage> {
    job.targets.iter().map(|(k, v)| (k.clone(), rgb_to_lab(v))).collect()
}

/// Runs the whole pipeline.
pub fn run(job: &TransferJob) -> Result<Outcome> {
    let total = Instant::now();
    let set = validate_job(job).map_err(|e| e.in_stage("validate"))?;

    let start = Instant::now();
    let lab = rgb_to_lab(&job.source);
    let targets = targets_lab(job);
    let convert_ms = ms(start);

    let start = Instant::now();
    let field = build_constraints(&lab, &set, &targets).map_err(|e| e.in_stage("constraints"))?;
    let constraints_ms = ms(start);

    let prepared = PreparedSource::new(lab, &job.config)?;
    let solved = prepared.solve(&field, &job.config, None)?;
    Ok(Outcome {
        timings: Timings {
            convert_ms,
            constraints_ms,
            landmarks_ms: prepared.landmarks_ms,
            graph_ms: prepared.graph_ms,
            solve_ms: solved.solve_ms,
            reconstruct_ms: solved.reconstruct_ms,
            total_ms: ms(total),
        },
        image: solved.image,
        lab: solved.lab,
        report: solved.report,
        landmark_count: prepared.landmarks.len(),
        k_used: prepared.k_used,
        beta_used: prepared.beta_used,
    })
}

/// The job scaled so the source's longer side is at most `max_dim`.
/// Target images shrink by the same rule.
pub fn downscale_job(job: &TransferJob, max_dim: usize) -> TransferJob {
    let (sw, sh) = fit_dims(job.source.width(), job.source.height(), max_dim);
    let mut target_dims = BTreeMap::new();
    let targets = job
        .targets
        .iter()
        .map(|(id, img)| {
            let (w, h) = fit_dims(img.width(), img.height(), max_dim);
            target_dims.insert(id.clone(), (w, h));
            (id.clone(), downscale_rgb(img, w, h))
        })
        .collect();
    let mut set = job.set.clone();
    for c in &mut set.correspondences {
        c.source_region = downscale_mask(&c.source_region, sw, sh);
        if let Some(&(w, h)) = target_dims.get(&c.target_id) {
            c.target_region = downscale_mask(&c.target_region, w, h);
        }
    }
    for k in &mut set.keep_regions {
        *k = downscale_mask(k, sw, sh);
    }
    TransferJob {
        source: downscale_rgb(&job.source, sw, sh),
        targets,
        set,
        config: job.config.clone(),
    }
}

/// Runs the pipeline on a copy of the job shrunk to fit `max_dim`.
pub fn preview(job: &TransferJob, max_dim: usize) -> Result<Outcome> {
    if max_dim < MIN_PREVIEW_DIM {
        return Err(Error::InvalidConfig(format!("preview size must be at least {MIN_PREVIEW_DIM}")));
    }
    if job.source.width().max(job.source.height()) <= max_dim {
        return run(job);
    }
    run(&downscale_job(job, max_dim))
}
