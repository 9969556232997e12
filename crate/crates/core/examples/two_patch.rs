//! End to end: recolor the warm half of an image with a cool target while
//! pinning the gray half.
//!
//! Writes `two_patch_source.png` and `two_patch_result.png` to the
//! directory given as the first argument (default: the system temp dir).

use chromaflow::{io, pipeline, synth};

fn main() -> chromaflow::Result<()> {
    let out_dir = std::env::args().nth(1).map_or_else(std::env::temp_dir, Into::into);
    let job = synth::two_patch_job(128, 96, 0);
    let out = pipeline::run(&job)?;
    println!("{}", out.status_json());

    let pair = &job.set.correspondences[0];
    let keep = &job.set.keep_regions[0];
    println!("target mean        {:.1?}", synth::region_mean_rgb(&job.targets["cool"], &pair.target_region));
    println!("edited region      {:.1?} -> {:.1?}", synth::region_mean_rgb(&job.source, &pair.source_region), synth::region_mean_rgb(&out.image, &pair.source_region));
    println!("kept region        {:.1?} -> {:.1?}", synth::region_mean_rgb(&job.source, keep), synth::region_mean_rgb(&out.image, keep));

    io::write_png(&job.source, out_dir.join("two_patch_source.png"))?;
    io::write_png(&out.image, out_dir.join("two_patch_result.png"))?;
    println!("wrote two_patch_*.png to {}", out_dir.display());
    Ok(())
}
