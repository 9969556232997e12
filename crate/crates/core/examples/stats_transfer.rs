//! Match a region's color statistics to a target image's region, with no
//! propagation: only the masked pixels change.
//!
//! Writes `stats_transfer.png` to the directory given as the first
//! argument (default: the system temp dir).

use chromaflow::stats::{region_stats, transfer_region};
use chromaflow::{lab_to_rgb, rgb_to_lab, synth, LabImage, RegionMask};

fn main() -> chromaflow::Result<()> {
    let out_dir = std::env::args().nth(1).map_or_else(std::env::temp_dir, Into::into);
    let source = synth::two_patch(96, 64, 1);
    let target = synth::noisy_patch(40, 30, synth::COOL, 10, 2);
    let region = RegionMask::rect(96, 64, 48, 0, 96, 64);
    let whole_target = RegionMask::rect(40, 30, 0, 0, 40, 30);

    let lab = rgb_to_lab(&source);
    let s = region_stats(&lab, &region)?;
    let t = region_stats(&rgb_to_lab(&target), &whole_target)?;
    println!("source region mean {:?} std {:?}", s.mean, s.stddev);
    println!("target region mean {:?} std {:?}", t.mean, t.stddev);

    let mut planes = lab.planes().clone();
    for (i, c) in transfer_region(&lab, &region, &s, &t) {
        for ch in 0..3 {
            planes[ch][i] = c[ch];
        }
    }
    let out = lab_to_rgb(&LabImage::new(96, 64, planes)?);
    println!("right half before {:?}", synth::region_mean_rgb(&source, &region));
    println!("right half after  {:?}", synth::region_mean_rgb(&out, &region));
    println!("target mean       {:?}", synth::region_mean_rgb(&target, &whole_target));
    let path = out_dir.join("stats_transfer.png");
    chromaflow::io::write_png(&out, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}
