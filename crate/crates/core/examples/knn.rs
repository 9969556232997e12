//! Exact k-nearest-neighbor queries in the 5-D color + position space.

use chromaflow::features::{build_features, DEFAULT_SPATIAL_WEIGHT};
use chromaflow::{rgb_to_lab, synth};

fn main() -> chromaflow::Result<()> {
    let img = synth::scene(48, 32, 3);
    let lab = rgb_to_lab(&img);
    let all: Vec<usize> = (0..lab.len()).collect();
    let space = build_features(&lab, &all, DEFAULT_SPATIAL_WEIGHT)?;

    let query = 16 * 48 + 24;
    println!("neighbors of pixel {query} (x=24, y=16):");
    for n in space.knn(query, 8)? {
        let (x, y) = (n.pixel_index % 48, n.pixel_index / 48);
        println!("  pixel {:5} at ({x:2}, {y:2})  d² = {:.6}", n.pixel_index, n.dist2);
    }

    // Without the spatial terms only color matters, so neighbors can be
    // anywhere in the image.
    let color_only = build_features(&lab, &all, 0.0)?;
    let far = color_only.knn(query, 8)?.iter().filter(|n| n.pixel_index.abs_diff(query) > 48 * 4).count();
    println!("with spatial weight 0, {far} of 8 neighbors are more than 4 rows away");
    Ok(())
}
