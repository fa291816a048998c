//! H-DP with gamma hyperpriors on both concentrations: the prior mean number
//! of groups, then a fit that learns θ and θ₀ alongside the partition.
//!
//! cargo run --release -p pexsbm --example hyperprior_fit

use pexsbm::franchise::PriorKernels;
use pexsbm::posterior::{min_vi_estimate, similarity, vi_distance, MinViOptions};
use pexsbm::sampler::{run_chain, GammaHyperprior, SamplerConfig};
use pexsbm::simulate::{generate_scenario, sample_prior_partition, ScenarioSpec, SCENARIO_LAYER_SIZES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let hyper = GammaHyperprior::new(5.0, 10.0, 12.0, 3.0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = Gamma::new(hyper.alpha, 1.0 / hyper.beta)?;
    let g0 = Gamma::new(hyper.alpha0, 1.0 / hyper.beta0)?;
    let draws = 2000;
    let mut groups = 0usize;
    for _ in 0..draws {
        let k = PriorKernels::hdp(g.sample(&mut rng), g0.sample(&mut rng))?;
        let (z, _) = sample_prior_partition(&SCENARIO_LAYER_SIZES, &k, &mut rng)?;
        groups += z.iter().max().unwrap() + 1;
    }
    println!("prior mean number of groups {:.2}", groups as f64 / draws as f64);

    let (net, z0) = generate_scenario(&ScenarioSpec::scenario(1, 5)?)?;
    let mut cfg = SamplerConfig::new(PriorKernels::hdp(hyper.mean_theta(), hyper.mean_theta0())?)
        .iterations(5000, 1000)
        .seed(5);
    cfg.hyperprior = Some(hyper);
    cfg.check_invariants = false;
    let trace = run_chain(&net, &cfg)?;
    let mean = |f: &dyn Fn(&pexsbm::sampler::Sample) -> f64| {
        trace.samples.iter().map(f).sum::<f64>() / trace.len() as f64
    };
    println!(
        "posterior means: theta {:.3}, theta0 {:.3}",
        mean(&|s| s.theta.unwrap()),
        mean(&|s| s.theta0.unwrap())
    );
    let zs: Vec<Vec<usize>> = trace.samples.iter().map(|s| s.z.clone()).collect();
    let est = min_vi_estimate(&similarity(trace.partitions())?, &zs, &MinViOptions::default())?;
    println!("H-hat {}, VI to truth {:.4}", est.h_hat, vi_distance(&est.z_hat, &z0)?);
    Ok(())
}
