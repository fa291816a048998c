//! Exact prior masses of every allocation of a small two-layer network,
//! computed directly from the frequency arrays and by enumerating the
//! sequential urn.
//!
//! cargo run -p pexsbm --example peppf_enumeration

use pexsbm::franchise::{frequency_array, peppf_log_mass, urn_partition_masses, PriorKernels};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let layer_of = [0, 0, 1, 1];
    let kernels = PriorKernels::hdp(1.0, 1.0)?;
    let masses = urn_partition_masses(&layer_of, 2, &kernels, 10)?;
    let mut worst: f64 = 0.0;
    for (z, p) in &masses {
        let direct = peppf_log_mass(&frequency_array(&layer_of, 2, z), &kernels)?.exp();
        worst = worst.max((direct - p).abs());
        println!("{z:?}  {p:.6}");
    }
    println!("{} allocations, total {:.12}", masses.len(), masses.values().sum::<f64>());
    println!("largest direct-vs-urn difference {worst:.2e}");
    Ok(())
}
