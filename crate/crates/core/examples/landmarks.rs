//! Landmark sub-sampling: pick a fraction of the pixels, triangulate
//! their colors, and express every other pixel as a blend of four
//! landmarks.

use chromaflow::landmarks::{Assignment, LandmarkSet};
use chromaflow::{rgb_to_lab, synth};

fn main() -> chromaflow::Result<()> {
    let img = synth::scene(160, 120, 4);
    let lab = rgb_to_lab(&img);
    for beta in [0.01, 0.05, 0.2] {
        let set = LandmarkSet::build(&lab, beta, 0)?;
        println!(
            "beta {beta:<4}: {:5} landmarks for {} pixels, {} tetrahedra, {} added to close the hull, {} extrapolated",
            set.len(),
            lab.len(),
            set.simplices().len(),
            set.hull_additions(),
            set.extrapolated_count()
        );
    }

    let set = LandmarkSet::build(&lab, 0.05, 0)?;
    let pixel = 60 * 160 + 80;
    match set.assignment(pixel) {
        Assignment::Landmark(j) => println!("pixel {pixel} is landmark {j}"),
        Assignment::Interpolated { landmarks, coefficients, .. } => {
            println!("pixel {pixel} = {coefficients:.4?} over landmarks {landmarks:?}");
        }
    }

    // Interpolating the landmarks' own l values reproduces every pixel's l.
    let l: Vec<f64> = set.colors().iter().map(|c| c[0]).collect();
    let rebuilt = set.reconstruct(&l);
    let err = rebuilt
        .iter()
        .zip(&lab.planes()[0])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("max reconstruction error of l: {err:.2e}");
    Ok(())
}
