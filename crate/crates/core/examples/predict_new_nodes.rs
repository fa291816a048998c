//! Holds out ten nodes of a simulated network, fits the rest, and predicts
//! the held-out nodes' groups and edges from their layers alone.
//!
//! cargo run --release -p pexsbm --example predict_new_nodes

use pexsbm::franchise::PriorKernels;
use pexsbm::posterior::MinViOptions;
use pexsbm::predict::{allocation_estimate, edge_probabilities, misallocation_count, PredictionRequest};
use pexsbm::sampler::{run_chain, SamplerConfig};
use pexsbm::simulate::{generate_scenario, ScenarioSpec};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ScenarioSpec::scenario(1, 21)?;
    let (full, z0) = generate_scenario(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut held: Vec<usize> = sample(&mut rng, full.num_nodes(), 10).into_vec();
    held.sort();
    let keep: Vec<usize> = (0..full.num_nodes()).filter(|v| !held.contains(v)).collect();
    let net = full.subnetwork(&keep)?;

    let mut cfg = SamplerConfig::new(PriorKernels::hdp(0.5, 4.0)?).iterations(4000, 1000).seed(2);
    cfg.check_invariants = false;
    let trace = run_chain(&net, &cfg)?;

    let layers: Vec<usize> = held.iter().map(|&v| full.layer_of(v)).collect();
    let request = PredictionRequest::new(&net, layers, 9)?;
    let probs = edge_probabilities(&trace, &net, &request)?;
    let order: Vec<usize> = keep.iter().chain(&held).copied().collect();
    let mut sq = 0.0;
    let mut n = 0;
    for (i, row) in probs.iter().enumerate() {
        for (u, p) in row.iter().enumerate() {
            if u == keep.len() + i {
                continue;
            }
            sq += (p - spec.edge_probability(held[i], order[u])).powi(2);
            n += 1;
        }
    }
    println!("edge-probability MSE vs truth: {:.4}", sq / n as f64);

    let est = allocation_estimate(&trace, &net, &request, &MinViOptions::default())?;
    let truth_in: Vec<usize> = keep.iter().map(|&v| z0[v]).collect();
    let truth_new: Vec<usize> = held.iter().map(|&v| z0[v]).collect();
    println!(
        "held-out groups {:?}, misallocated {} of 10",
        &est.z_hat[keep.len()..],
        misallocation_count(&est.z_hat, &truth_in, &truth_new)
    );
    Ok(())
}
