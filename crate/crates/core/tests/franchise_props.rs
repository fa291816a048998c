mod common;

use pexsbm::check::{random_kernels, random_layer_sizes, random_state};
use pexsbm::franchise::{
    coclustering_probability, frequency_array, joint_conditional, marginal_urn, peppf_log_mass,
    urn_partition_masses, FranchiseState, PriorKernels, Seat,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn seeded() -> impl Strategy<Value = ChaCha8Rng> {
    any::<u64>().prop_map(ChaCha8Rng::seed_from_u64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn urns_match_eppf_ratio_oracle(mut rng in seeded()) {
        let sizes = random_layer_sizes(&mut rng, 4, 20);
        let state = random_state(&mut rng, &sizes, 5);
        let k = random_kernels(&mut rng);
        let j = rng.random_range(0..sizes.len());
        let table = joint_conditional(&state, j, &k);
        let oracle = common::oracle_seats(&state, j, &k);
        let n_ex = table.existing.len();
        for (t, e) in table.existing.iter().enumerate() {
            prop_assert_eq!(e.subgroup, t);
            prop_assert!((e.prob - oracle[t].1).abs() < 1e-12);
        }
        for (h, p) in table.new_subgroup.iter().enumerate() {
            prop_assert!((p - oracle[n_ex + h].1).abs() < 1e-12);
        }
        prop_assert!((table.total() - 1.0).abs() < 1e-10);
        let m = marginal_urn(&state, j, &k);
        let om = common::oracle_marginal(&state, j, &k);
        prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        for (x, y) in m.iter().zip(&om) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        // rows of the table marginalize to the urn
        for (x, y) in table.row_sums().iter().zip(&m) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn each_existing_subgroup_has_one_profile(mut rng in seeded()) {
        let sizes = random_layer_sizes(&mut rng, 3, 20);
        let state = random_state(&mut rng, &sizes, 5);
        let k = random_kernels(&mut rng);
        let j = rng.random_range(0..sizes.len());
        let dense = joint_conditional(&state, j, &k).dense();
        let n_ex = state.subgroups(j).len();
        for t in 0..n_ex {
            let nonzero = dense.iter().filter(|row| row[t] > 0.0).count();
            prop_assert_eq!(nonzero, 1);
        }
    }

    #[test]
    fn coclustering_matches_two_step_oracle(mut rng in seeded()) {
        let sizes = random_layer_sizes(&mut rng, 3, 15);
        let mut state = random_state(&mut rng, &sizes, 4);
        if rng.random_bool(0.2) {
            state = FranchiseState::empty(state.layers().to_vec(), sizes.len()).unwrap();
        }
        let k = random_kernels(&mut rng);
        let j = rng.random_range(0..sizes.len());
        let jp = rng.random_range(0..sizes.len());
        let closed = coclustering_probability(&state, j, jp, &k);
        let oracle = common::oracle_coclustering(&state, j, jp, &k);
        prop_assert!((closed - oracle).abs() < 1e-12, "{} vs {}", closed, oracle);
    }

    #[test]
    fn remove_then_undo_restores_state(mut rng in seeded(), moves in 1usize..40) {
        let sizes = random_layer_sizes(&mut rng, 4, 20);
        let mut state = random_state(&mut rng, &sizes, 5);
        let n = state.num_nodes();
        for _ in 0..moves {
            let v = rng.random_range(0..n);
            let before = (state.canonical_z(), state.canonical_w());
            let rec = state.remove_node(v).unwrap();
            prop_assert!(state.check_invariants().is_ok());
            if rng.random_bool(0.5) {
                state.undo(&rec).unwrap();
                prop_assert_eq!((state.canonical_z(), state.canonical_w()), before);
            } else {
                let j = state.layer_of(v);
                let n_ex = state.subgroups(j).len();
                let h_count = state.num_profiles();
                let pick = rng.random_range(0..n_ex + h_count + 1);
                let seat = if pick < n_ex {
                    Seat::Existing(pick)
                } else {
                    let h = pick - n_ex;
                    Seat::NewSubgroup((h < h_count).then_some(h))
                };
                state.insert_node(v, seat).unwrap();
            }
            prop_assert!(state.check_invariants().is_ok());
        }
    }

    #[test]
    fn permuted_nodes_give_identical_tables(mut rng in seeded()) {
        let sizes = random_layer_sizes(&mut rng, 3, 20);
        let state = random_state(&mut rng, &sizes, 5);
        let k = random_kernels(&mut rng);
        let (z, w) = (state.canonical_z(), state.canonical_w());
        // shuffle nodes within each layer
        let mut perm: Vec<usize> = (0..z.len()).collect();
        let mut start = 0;
        for &s in &sizes {
            let block = &mut perm[start..start + s];
            for i in (1..block.len()).rev() {
                block.swap(i, rng.random_range(0..=i));
            }
            start += s;
        }
        let zp: Vec<usize> = perm.iter().map(|&v| z[v]).collect();
        let wp: Vec<usize> = perm.iter().map(|&v| w[v]).collect();
        let other = FranchiseState::from_assignment(state.layers().to_vec(), sizes.len(), &zp, &wp).unwrap();
        for j in 0..sizes.len() {
            let mut a: Vec<u64> = table_bits(&state, j, &k);
            let mut b: Vec<u64> = table_bits(&other, j, &k);
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
        }
    }
}

fn table_bits(state: &FranchiseState, j: usize, k: &PriorKernels) -> Vec<u64> {
    let t = joint_conditional(state, j, k);
    t.existing
        .iter()
        .map(|e| e.prob.to_bits())
        .chain(t.new_subgroup.iter().map(|p| p.to_bits()))
        .collect()
}

#[test]
fn empty_state_homophily() {
    let k = PriorKernels::hdp(1.0, 1.0).unwrap();
    let s = FranchiseState::empty(vec![0, 1], 2).unwrap();
    let same = coclustering_probability(&s, 0, 0, &k);
    let cross = coclustering_probability(&s, 0, 1, &k);
    assert!((same - 0.75).abs() < 1e-12);
    assert!((cross - 0.5).abs() < 1e-12);
}

fn marginalize_consistent(sizes: &[usize], k: &PriorKernels) -> f64 {
    let layer_of = common::layer_of(sizes);
    let d = sizes.len();
    let full = urn_partition_masses(&layer_of, d, k, 8).unwrap();
    let mut worst: f64 = 0.0;
    for j in 0..d {
        if sizes[j] < 2 {
            continue;
        }
        // drop the last node of layer j
        let drop = layer_of.iter().rposition(|&l| l == j).unwrap();
        let mut smaller = sizes.to_vec();
        smaller[j] -= 1;
        let small_layers = common::layer_of(&smaller);
        let mut acc = std::collections::HashMap::<Vec<usize>, f64>::new();
        for (z, p) in &full {
            let mut zs = z.clone();
            zs.remove(drop);
            let zs = pexsbm::franchise::canonical_labels(zs);
            *acc.entry(zs).or_default() += p;
        }
        for (z, p) in acc {
            let f = frequency_array(&small_layers, d, &z);
            let direct = peppf_log_mass(&f, k).unwrap().exp();
            worst = worst.max((direct - p).abs());
        }
    }
    worst
}

#[test]
fn kolmogorov_consistency_small() {
    for k in [PriorKernels::hdp(0.7, 2.0).unwrap(), PriorKernels::hnsp(0.3, 0.6).unwrap()] {
        for sizes in [vec![2, 1], vec![2, 2], vec![3, 1], vec![1, 1, 2]] {
            assert!(marginalize_consistent(&sizes, &k) < 1e-10);
        }
    }
}
