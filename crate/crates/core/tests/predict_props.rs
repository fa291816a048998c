mod common;

use pexsbm::franchise::{coclustering_probability, PriorKernels};
use pexsbm::network::SupraNetwork;
use pexsbm::predict::{
    augmented_draws, augmented_state, edge_probabilities, joint_config_logprob,
    predictive_coclustering, sample_new_allocations, NewConfiguration, PredictionRequest,
};
use pexsbm::sampler::{run_chain, Sample, SampleTrace, SamplerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sample(z: Vec<usize>, w: Vec<usize>) -> Sample {
    Sample { sweep: 1, num_groups: z.iter().max().map_or(0, |m| m + 1), z, w, log_lik: 0.0, theta: None, theta0: None }
}

fn trace(net: &SupraNetwork, samples: Vec<Sample>, k: PriorKernels, a: f64, b: f64) -> SampleTrace {
    let mut config = SamplerConfig::new(k);
    config.a = a;
    config.b = b;
    SampleTrace {
        samples,
        config,
        layer_of: net.layers().to_vec(),
        num_layers: net.num_layers(),
        chain: 0,
        wall_time_secs: 0.0,
    }
}

#[test]
fn single_draws_follow_the_marginal_urn() {
    let sizes = [3, 2];
    let layer_of = common::layer_of(&sizes);
    let s = sample(vec![0, 0, 1, 1, 2], vec![0, 1, 2, 0, 1]);
    let k = PriorKernels::hnsp(0.4, 0.6).unwrap();
    for j in 0..2 {
        let state = augmented_state(&s, &layer_of, 2, &[j]).unwrap();
        let want = common::oracle_marginal(&state, j, &k);
        let mut rng = ChaCha8Rng::seed_from_u64(j as u64);
        let n = 100_000;
        let mut hist = vec![0usize; want.len()];
        for _ in 0..n {
            let (z_new, _) = sample_new_allocations(&s, &layer_of, 2, &k, &[j], &mut rng).unwrap();
            hist[z_new[0]] += 1;
        }
        for (h, &p) in want.iter().enumerate() {
            let freq = hist[h] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() <= 3.0 * se + 1e-12, "layer {j} profile {h}: {freq} vs {p}");
        }
    }
}

#[test]
fn pair_draws_match_theorem_value() {
    let sizes = [2, 3];
    let layer_of = common::layer_of(&sizes);
    let s = sample(vec![0, 1, 0, 0, 2], vec![0, 1, 0, 1, 2]);
    let k = PriorKernels::hdp(0.9, 1.7).unwrap();
    for (j, jp) in [(0, 0), (0, 1), (1, 1)] {
        let state = augmented_state(&s, &layer_of, 2, &[]).unwrap();
        let want = coclustering_probability(&state, j, jp, &k);
        assert!((want - common::oracle_coclustering(&state, j, jp, &k)).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(40 + j as u64 + jp as u64);
        let n = 100_000;
        let mut tied = 0usize;
        for _ in 0..n {
            let (z_new, _) = sample_new_allocations(&s, &layer_of, 2, &k, &[j, jp], &mut rng).unwrap();
            tied += usize::from(z_new[0] == z_new[1]);
        }
        let freq = tied as f64 / n as f64;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((freq - want).abs() <= 3.0 * se, "({j},{jp}): {freq} vs {want}");
    }
}

#[test]
fn configuration_probability_matches_enumeration() {
    let net = SupraNetwork::from_layer_sizes(&[2, 2], &[(0, 1), (1, 2), (2, 3)]).unwrap();
    let s = sample(vec![0, 0, 1, 1], vec![0, 0, 0, 0]);
    let k = PriorKernels::hdp(1.0, 2.0).unwrap();
    let (a, b) = (1.0, 1.0);
    let t = trace(&net, vec![s.clone()], k.clone(), a, b);
    // the new node, in layer 1, links to nodes 0 and 3
    let row = vec![true, false, false, true, false];
    let config = NewConfiguration::new(vec![row.clone()], 4).unwrap();

    let state = augmented_state(&s, net.layers(), 2, &[1]).unwrap();
    let base = common::brute_log_lik(&net, &s.z, a, b, None);
    let mut edges = net.edges();
    for (u, &e) in row.iter().enumerate().take(4) {
        if e {
            edges.push((u, 4));
        }
    }
    let aug = SupraNetwork::from_layer_sizes(&[2, 3], &edges).unwrap();
    let mut exact = 0.0;
    for h in 0..=state.num_profiles() {
        let p = common::oracle_marginal(&state, 1, &k)[h];
        // node order in the augmented network: layer 0, then layer 1 with the new node last
        let z_aug = vec![s.z[0], s.z[1], s.z[2], s.z[3], h];
        exact += p * (common::brute_log_lik(&aug, &z_aug, a, b, None) - base).exp();
    }

    let mut req = PredictionRequest::new(&net, vec![1], 8).unwrap();
    req.inner_draws = 200_000;
    let est = joint_config_logprob(&t, &net, &req, &config).unwrap();
    assert!((est.exp() - exact).abs() / exact < 0.01, "{} vs {exact}", est.exp());
}

#[test]
fn same_layer_order_does_not_matter() {
    let net = SupraNetwork::from_layer_sizes(&[3, 2], &[(0, 1), (3, 4)]).unwrap();
    let s = sample(vec![0, 0, 1, 1, 1], vec![0, 0, 1, 0, 0]);
    let k = PriorKernels::hnsp(0.3, 0.5).unwrap();
    let t = trace(&net, vec![s], k, 1.0, 1.0);
    let rate = |layers: Vec<usize>, pair: (usize, usize), seed: u64| {
        let mut req = PredictionRequest::new(&net, layers, seed).unwrap();
        req.inner_draws = 60_000;
        let draws = augmented_draws(&t, &net, &req).unwrap();
        draws.iter().filter(|z| z[5 + pair.0] == z[5 + pair.1]).count() as f64 / draws.len() as f64
    };
    // the layer-1 node paired with each of the two layer-0 nodes, in both orders
    let a = rate(vec![0, 1, 0], (0, 1), 1);
    let b = rate(vec![0, 0, 1], (1, 2), 2);
    let c = rate(vec![0, 1, 0], (2, 1), 3);
    let se = (a * (1.0 - a) / 60_000.0).sqrt();
    assert!((a - b).abs() < 4.0 * se * std::f64::consts::SQRT_2, "{a} vs {b}");
    assert!((a - c).abs() < 4.0 * se * std::f64::consts::SQRT_2, "{a} vs {c}");
}

#[test]
fn no_in_sample_dyads_give_prior_edge_probability() {
    let net = SupraNetwork::from_layer_sizes(&[1], &[]).unwrap();
    let (a, b) = (2.0, 3.0);
    let t = trace(&net, vec![sample(vec![0], vec![0]); 5], PriorKernels::hdp(0.5, 4.0).unwrap(), a, b);
    let req = PredictionRequest::new(&net, vec![0, 0, 0], 4).unwrap();
    let p = edge_probabilities(&t, &net, &req).unwrap();
    for (i, row) in p.iter().enumerate() {
        for (u, &x) in row.iter().enumerate() {
            if u == 1 + i {
                assert_eq!(x, 0.0);
            } else {
                assert_eq!(x, a / (a + b));
            }
        }
    }
}

#[test]
fn predictive_outputs_are_well_formed() {
    let net = SupraNetwork::from_layer_sizes(&[4, 3], &[(0, 1), (1, 2), (4, 5), (2, 5), (3, 6)]).unwrap();
    let mut cfg = SamplerConfig::new(PriorKernels::hdp(0.5, 4.0).unwrap()).iterations(300, 100).seed(2);
    cfg.check_invariants = false;
    let t = run_chain(&net, &cfg).unwrap();
    let req = PredictionRequest::new(&net, vec![1, 0, 1], 6).unwrap();
    let sim = predictive_coclustering(&t, &net, &req).unwrap();
    for v in 0..sim.len() {
        assert_eq!(sim.get(v, v), 1.0);
        for u in 0..sim.len() {
            assert_eq!(sim.get(v, u), sim.get(u, v));
            assert!((0.0..=1.0).contains(&sim.get(v, u)));
        }
    }
    let p = edge_probabilities(&t, &net, &req).unwrap();
    assert!(p.iter().flatten().all(|x| (0.0..=1.0).contains(x)));
    assert!(PredictionRequest::new(&net, vec![2], 0).is_err());
    assert!(PredictionRequest::new(&net, vec![], 0).is_err());
    assert!(PredictionRequest::from_labels(&net, &["L3"], 0).is_err());
}

#[test]
fn outcomes_of_one_new_dyad_sum_to_one() {
    let net = SupraNetwork::from_layer_sizes(&[1], &[]).unwrap();
    let t = trace(&net, vec![sample(vec![0], vec![0])], PriorKernels::hdp(1.0, 1.0).unwrap(), 1.0, 1.0);
    let mut req = PredictionRequest::new(&net, vec![0], 0).unwrap();
    req.inner_draws = 50;
    let p: f64 = [false, true]
        .iter()
        .map(|&e| {
            let c = NewConfiguration::new(vec![vec![e, false]], 1).unwrap();
            joint_config_logprob(&t, &net, &req, &c).unwrap().exp()
        })
        .sum();
    assert!((p - 1.0).abs() < 1e-12);
}
