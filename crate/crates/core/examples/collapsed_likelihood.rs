//! Collapsed beta-binomial likelihood of an allocation and the per-node
//! log-ratio used by the Gibbs sampler.
//!
//! cargo run -p pexsbm --example collapsed_likelihood

use pexsbm::likelihood::{induced_counts, log_marginal_likelihood};
use pexsbm::network::SupraNetwork;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // two triangles joined by one edge
    let net = SupraNetwork::from_layer_sizes(&[3, 3], &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])?;
    for z in [[0, 0, 0, 1, 1, 1], [0, 0, 0, 0, 0, 0], [0, 1, 2, 3, 4, 5]] {
        let counts = induced_counts(&net, &z, 1.0, 1.0)?;
        println!("z = {z:?}: log p(Y | z) = {:.4}", log_marginal_likelihood(&counts));
    }

    // moving node 2 out of the first triangle, scored incrementally
    let z = [0, 0, 0, 1, 1, 1];
    let mut counts = induced_counts(&net, &z, 1.0, 1.0)?;
    let mut groups: Vec<Option<usize>> = z.iter().map(|&h| Some(h)).collect();
    groups[2] = None;
    counts.remove_node(&net, &groups, 2, 0);
    let mut r = Vec::new();
    counts.node_tallies(&net, &groups, 2, &mut r);
    let rbar: Vec<usize> = (0..counts.num_groups()).map(|h| counts.size(h) - r[h]).collect();
    for h in [Some(0), Some(1), None] {
        let lr = counts.log_likelihood_ratio_for_node(&r, &rbar, h)?;
        println!("node 2 -> {h:?}: log-ratio {lr:.4}");
    }
    Ok(())
}
