//! Fast preview on a downscaled copy versus the full-resolution solve.

use chromaflow::{pipeline, synth};

fn main() -> chromaflow::Result<()> {
    let job = synth::large_job(1);
    for max_dim in [128, 256, 512] {
        let out = pipeline::preview(&job, max_dim)?;
        println!(
            "preview {max_dim:4}: {}x{} in {:7.1} ms, {} landmarks",
            out.image.width(),
            out.image.height(),
            out.timings.total_ms,
            out.landmark_count
        );
    }
    let full = pipeline::run(&job)?;
    println!(
        "full        : {}x{} in {:7.1} ms, {} landmarks",
        full.image.width(),
        full.image.height(),
        full.timings.total_ms,
        full.landmark_count
    );
    Ok(())
}
