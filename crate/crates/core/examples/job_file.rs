//! Write a job directory (images, masks, job.json) that the `chromaflow`
//! command line tool can run, then load it back.
//!
//! `cargo run --example job_file -- /tmp/two-patch`
//! `chromaflow transfer --job /tmp/two-patch/job.json --out /tmp/out.png`

use chromaflow::job::{write_job, JobSpec};
use chromaflow::synth;

fn main() -> chromaflow::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("chromaflow-two-patch"), Into::into);
    let spec = write_job(&synth::two_patch_job(128, 96, 0), &dir)?;
    println!("{}", spec.to_json());
    let loaded = JobSpec::read(dir.join("job.json"))?.load()?;
    println!(
        "loaded {}x{} source, {} target(s), {} correspondence(s), {} keep region(s)",
        loaded.source.width(),
        loaded.source.height(),
        loaded.targets.len(),
        loaded.set.correspondences.len(),
        loaded.set.keep_regions.len()
    );
    Ok(())
}
