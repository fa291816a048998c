//! Prior draws of partitions on the benchmark layer sizes: how the number
//! of groups responds to the concentration parameters.
//!
//! cargo run --release -p pexsbm --example prior_simulation

use pexsbm::franchise::PriorKernels;
use pexsbm::simulate::{sample_prior_partition, SCENARIO_LAYER_SIZES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let draws = 2000;
    let settings = [
        ("H-DP(0.5, 4)", PriorKernels::hdp(0.5, 4.0)?),
        ("H-DP(1, 4)", PriorKernels::hdp(1.0, 4.0)?),
        ("H-DP(2, 8)", PriorKernels::hdp(2.0, 8.0)?),
        ("H-NSP(0.2, 0.8)", PriorKernels::hnsp(0.2, 0.8)?),
        ("H-NSP(0.4, 0.8)", PriorKernels::hnsp(0.4, 0.8)?),
    ];
    for (name, k) in settings {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut total = 0usize;
        for _ in 0..draws {
            let (z, _) = sample_prior_partition(&SCENARIO_LAYER_SIZES, &k, &mut rng)?;
            total += z.iter().max().map_or(0, |m| m + 1);
        }
        println!("{name:16} mean number of groups {:.2}", total as f64 / draws as f64);
    }
    Ok(())
}
