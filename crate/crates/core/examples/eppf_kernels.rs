//! Dirichlet, normalized-stable and user-supplied EPPFs: probabilities of
//! frequency vectors and their one-step urn ratios.
//!
//! cargo run -p pexsbm --example eppf_kernels

use pexsbm::eppf::{integer_partitions, set_partition_count, Change, EppfKernel, GenericEppf};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dp = EppfKernel::dirichlet(1.0)?;
    let nsp = EppfKernel::stable(0.5)?;
    // a Dirichlet process with θ = 2 written out by hand
    let custom = EppfKernel::Generic(GenericEppf::new("dp2", |n: &[usize]| {
        let theta: f64 = 2.0;
        let total: usize = n.iter().sum();
        let mut lp = n.len() as f64 * theta.ln();
        for i in 0..total {
            lp -= (theta + i as f64).ln();
        }
        for &k in n {
            lp += (1..k).map(|i| (i as f64).ln()).sum::<f64>();
        }
        lp
    })?);

    for (name, k) in [("DP(1)", &dp), ("NSP(0.5)", &nsp), ("generic DP(2)", &custom)] {
        println!("{name}");
        for p in integer_partitions(4) {
            println!("  {p:?}: {:.5}", k.log_phi(&p)?.exp());
        }
        let total: f64 = integer_partitions(6)
            .iter()
            .map(|p| set_partition_count(p) * k.log_phi(p).unwrap().exp())
            .sum();
        println!("  total mass over partitions of 6: {total:.12}");
        let join = k.log_ratio_add(&[2, 1], Change::Increment(0))?.exp();
        let open = k.log_ratio_add(&[2, 1], Change::NewCluster)?.exp();
        println!("  from (2,1): join first block {join:.4}, open a block {open:.4}");
    }
    Ok(())
}
