//! JSON job files.
//!
//! ```json
//! {"source": "src.png",
//!  "targets": {"sky": "sky.jpg"},
//!  "correspondences": [{"source_mask": "m1.png", "target": "sky", "target_mask": "t1.png"}],
//!  "keep_masks": ["keep.png"],
//!  "config": {"k": 21, "beta": 0.05, "lambda": 100, "spatial_weight": 0.5, "seed": 0, "tol": 1e-6}}
//! ```
//!
//! Relative paths are resolved against the directory holding the job file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_mask, read_rgb};
use crate::pipeline::{PipelineConfig, TransferJob};
use crate::regions::{Correspondence, CorrespondenceSet, RegionMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub source_mask: PathBuf,
    pub target: String,
    pub target_mask: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub source: PathBuf,
    #[serde(default)]
    pub targets: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub correspondences: Vec<PairSpec>,
    #[serde(default)]
    pub keep_masks: Vec<PathBuf>,
    #[serde(default)]
    pub config: PipelineConfig,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn mask_for(path: &Path, dims: (usize, usize)) -> Result<RegionMask> {
    let mask = read_mask(path)?;
    mask.check_dims(&path.display().to_string(), dims)?;
    Ok(mask)
}

impl JobSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Parses a job file and makes its paths absolute.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut spec = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        spec.rebase(base);
        Ok(spec)
    }

    /// Resolves relative paths against `base`.
    pub fn rebase(&mut self, base: &Path) {
        self.source = resolve(base, &self.source);
        for p in self.targets.values_mut() {
            *p = resolve(base, p);
        }
        for c in &mut self.correspondences {
            c.source_mask = resolve(base, &c.source_mask);
            c.target_mask = resolve(base, &c.target_mask);
        }
        for k in &mut self.keep_masks {
            *k = resolve(base, k);
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("job spec serializes")
    }

    /// Reads every image and mask. Mask size errors name the mask file.
    pub fn load(&self) -> Result<TransferJob> {
        let source = read_rgb(&self.source)?;
        let mut targets = BTreeMap::new();
        for (id, p) in &self.targets {
            targets.insert(id.clone(), read_rgb(p)?);
        }
        let mut correspondences = Vec::with_capacity(self.correspondences.len());
        for c in &self.correspondences {
            let target = targets.get(&c.target).ok_or_else(|| Error::UnknownTarget(c.target.clone()))?;
            correspondences.push(Correspondence {
                source_region: mask_for(&c.source_mask, source.dims())?,
                target_id: c.target.clone(),
                target_region: mask_for(&c.target_mask, target.dims())?,
            });
        }
        let keep_regions = self
            .keep_masks
            .iter()
            .map(|p| mask_for(p, source.dims()))
            .collect::<Result<Vec<_>>>()?;
        Ok(TransferJob {
            source,
            targets,
            set: CorrespondenceSet::new(correspondences, keep_regions),
            config: self.config.clone(),
        })
    }
}

/// Writes `job`'s images and masks into `dir` and returns a spec that
/// references them by relative path.
pub fn write_job(job: &TransferJob, dir: impl AsRef<Path>) -> Result<JobSpec> {
    use crate::io::{write_mask, write_png};
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_png(&job.source, dir.join("source.png"))?;
    let mut targets = BTreeMap::new();
    for (id, img) in &job.targets {
        let name = format!("target-{id}.png");
        write_png(img, dir.join(&name))?;
        targets.insert(id.clone(), PathBuf::from(name));
    }
    let mut correspondences = Vec::new();
    for (i, c) in job.set.correspondences.iter().enumerate() {
        let s = format!("pair{i}-source.png");
        let t = format!("pair{i}-target.png");
        write_mask(&c.source_region, dir.join(&s))?;
        write_mask(&c.target_region, dir.join(&t))?;
        correspondences.push(PairSpec {
            source_mask: s.into(),
            target: c.target_id.clone(),
            target_mask: t.into(),
        });
    }
    let mut keep_masks = Vec::new();
    for (i, k) in job.set.keep_regions.iter().enumerate() {
        let name = format!("keep{i}.png");
        write_mask(k, dir.join(&name))?;
        keep_masks.push(name.into());
    }
    let spec = JobSpec {
        source: "source.png".into(),
        targets,
        correspondences,
        keep_masks,
        config: job.config.clone(),
    };
    std::fs::write(dir.join("job.json"), spec.to_json())?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_fill_in() {
        let spec = JobSpec::from_json(r#"{"source": "a.png", "config": {"k": 7}}"#).unwrap();
        assert_eq!(spec.config.k, 7);
        assert_eq!(spec.config.beta, 0.05);
        assert_eq!(spec.config.lambda, 100.0);
        assert!(spec.correspondences.is_empty());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(JobSpec::from_json(r#"{"source": "a.png", "bogus": 1}"#).is_err());
        assert!(JobSpec::from_json(r#"{"source": "a.png", "config": {"kk": 1}}"#).is_err());
    }

    #[test]
    fn rebase_keeps_absolute_paths() {
        let mut spec = JobSpec::from_json(r#"{"source": "/abs/a.png", "keep_masks": ["k.png"]}"#).unwrap();
        spec.rebase(Path::new("/jobs"));
        assert_eq!(spec.source, PathBuf::from("/abs/a.png"));
        assert_eq!(spec.keep_masks[0], PathBuf::from("/jobs/k.png"));
    }
}
