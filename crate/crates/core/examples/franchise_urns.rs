//! Urn probabilities on a franchise state: the joint (profile, subgroup)
//! table, the marginal profile urn, co-clustering of two new nodes and
//! the homophily check.
//!
//! cargo run -p pexsbm --example franchise_urns

use pexsbm::franchise::{
    coclustering_probability, elicitation_check, joint_conditional, marginal_urn, FranchiseState,
    PriorKernels,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // layer 0: nodes 0,1 share a subgroup; node 2 sits alone with the same profile.
    // layer 1: node 3 carries the first profile, node 4 a second one.
    let state = FranchiseState::from_assignment(vec![0, 0, 0, 1, 1], 2, &[0, 0, 0, 0, 1], &[0, 0, 1, 0, 1])?;

    for (name, k) in [("H-DP(1, 1)", PriorKernels::hdp(1.0, 1.0)?), ("H-NSP(0.5, 0.5)", PriorKernels::hnsp(0.5, 0.5)?)] {
        println!("{name}");
        let table = joint_conditional(&state, 0, &k);
        for e in &table.existing {
            println!("  existing subgroup {} (profile {}): {:.4}", e.subgroup, e.profile, e.prob);
        }
        for (h, p) in table.new_subgroup.iter().enumerate() {
            let label = if h < table.num_profiles() { format!("profile {h}") } else { "new profile".into() };
            println!("  new subgroup, {label}: {p:.4}");
        }
        println!("  marginal urn for layer 0: {:?}", round(&marginal_urn(&state, 0, &k)));
        println!(
            "  two new nodes co-cluster: same layer {:.4}, across layers {:.4}",
            coclustering_probability(&state, 0, 0, &k),
            coclustering_probability(&state, 0, 1, &k)
        );
        let r = elicitation_check(&state, 1, &k);
        println!(
            "  layer 1: within {:.4} vs outside {:.4}, condition {:?}",
            r.within_prob,
            r.outside_prob(),
            r.condition_holds
        );
    }
    Ok(())
}

fn round(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}
