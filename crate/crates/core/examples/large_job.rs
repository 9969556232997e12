//! Timing of a 1024x686 source with two targets (1024x768 and 301x220),
//! k = 21, beta = 0.05. Stage timings go to stdout as JSON.
//!
//! `cargo run --release --example large_job`

use chromaflow::{pipeline, synth};

fn main() -> chromaflow::Result<()> {
    let job = synth::large_job(0);
    println!("threads: {}", rayon::current_num_threads());
    for run in 0..3 {
        let out = pipeline::run(&job)?;
        println!("run {run}: {}", serde_json::to_string(&out.timings).expect("timings serialize"));
    }
    Ok(())
}
