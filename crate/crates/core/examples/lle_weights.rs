//! Locally linear reconstruction weights for a single point, and a whole
//! weight graph over an image.

use chromaflow::features::{build_features, DEFAULT_SPATIAL_WEIGHT};
use chromaflow::lle::{build_graph, reconstruction_error, solve_weights};
use chromaflow::{rgb_to_lab, synth};

fn main() -> chromaflow::Result<()> {
    let x = [0.3, 0.1, -0.2, 0.5, 0.5];
    let neighbors: Vec<[f64; 5]> = vec![
        [0.2, 0.1, -0.2, 0.5, 0.5],
        [0.5, 0.15, -0.2, 0.5, 0.5],
        [0.3, 0.2, -0.1, 0.5, 0.5],
        [0.3, 0.0, -0.3, 0.5, 0.5],
    ];
    let refs: Vec<&[f64]> = neighbors.iter().map(|n| n.as_slice()).collect();
    let w = solve_weights(&x, &refs);
    println!("weights {w:.4?} (sum {:.12})", w.iter().sum::<f64>());
    println!("reconstruction error {:.3e}", reconstruction_error(&x, &refs, &w));

    let lab = rgb_to_lab(&synth::scene(64, 48, 1));
    let all: Vec<usize> = (0..lab.len()).collect();
    let graph = build_graph(&build_features(&lab, &all, DEFAULT_SPATIAL_WEIGHT)?, 21)?;
    let worst = graph
        .rows()
        .map(|r| (r.weights.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let negative = graph.rows().flat_map(|r| r.weights.iter()).filter(|&&w| w < 0.0).count();
    println!(
        "graph: {} rows x {} neighbors, max |row sum - 1| = {worst:.1e}, {negative} negative weights",
        graph.n(),
        graph.k()
    );
    Ok(())
}
