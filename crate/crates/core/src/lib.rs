//! Example-based image recoloring.
//!
//! Colors are transferred from target images into user-marked regions of a
//! source image by matching per-channel statistics in the lαβ color space.
//! Those sparse edits are then propagated over the rest of the image by
//! solving a sparse linear system built from locally linear embedding
//! weights, optionally on a random landmark subset whose solution is
//! interpolated back through a Delaunay tetrahedralization of the colors.
//!
//! ```no_run
//! use chromaflow::{job::JobSpec, pipeline};
//!
//! let job = JobSpec::read("job.json")?.load()?;
//! let out = pipeline::run(&job)?;
//! chromaflow::io::write_png(&out.image, "out.png")?;
//! # Ok::<(), chromaflow::Error>(())
//! ```

pub mod colorspace;
pub mod error;
pub mod features;
pub mod io;
pub mod job;
pub mod landmarks;
pub mod lle;
pub mod pipeline;
pub mod regions;
pub mod resample;
pub mod solver;
pub mod stats;
pub mod synth;

pub use colorspace::{lab_to_rgb, rgb_to_lab, LabImage, RgbImage};
pub use error::{Error, Result};
pub use landmarks::LandmarkSet;
pub use lle::LleGraph;
pub use pipeline::{Outcome, PipelineConfig, PreparedSource, TransferJob};
pub use regions::{Correspondence, CorrespondenceSet, RegionMask};
pub use stats::ConstraintField;
