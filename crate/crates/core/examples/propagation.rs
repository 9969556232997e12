//! Solve the propagation system directly: a few pixels get target values
//! and the weight graph spreads them to similar pixels.

use chromaflow::features::{build_features, DEFAULT_SPATIAL_WEIGHT};
use chromaflow::lle::build_graph;
use chromaflow::solver::{assemble, DEFAULT_LAMBDA, DEFAULT_TOL};
use chromaflow::{rgb_to_lab, synth};

fn main() -> chromaflow::Result<()> {
    let (w, h) = (48, 32);
    let lab = rgb_to_lab(&synth::two_patch(w, h, 7));
    let all: Vec<usize> = (0..lab.len()).collect();
    let graph = build_graph(&build_features(&lab, &all, DEFAULT_SPATIAL_WEIGHT)?, 21)?;

    // Pin one pixel on each side: +1 on the right patch, 0 on the left.
    let mut constraints = vec![None; lab.len()];
    constraints[16 * w + 40] = Some([1.0; 3]);
    constraints[16 * w + 8] = Some([0.0; 3]);
    let system = assemble(&graph, &constraints, DEFAULT_LAMBDA)?;
    let zeros = [vec![0.0; lab.len()], vec![0.0; lab.len()], vec![0.0; lab.len()]];
    let report = system.solve(&zeros, DEFAULT_TOL, 10_000);
    println!(
        "{} CG iterations, relative residual {:.1e}, energy {:.3e}",
        report.iterations[0], report.relative_residual[0], report.energy[0]
    );

    let s = &report.solution[0];
    let mean = |x0: usize, x1: usize| {
        let v: Vec<f64> = (0..h).flat_map(|y| (x0..x1).map(move |x| y * w + x)).map(|i| s[i]).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    println!("mean value on the left patch  {:.3}", mean(0, w / 2));
    println!("mean value on the right patch {:.3}", mean(w / 2, w));
    Ok(())
}
