//! Brute-force oracles shared by the integration tests. They use only the
//! public EPPF evaluator and raw counts, never the urn or likelihood code
//! they check.

#![allow(dead_code)]

use pexsbm::eppf::EppfKernel;
use pexsbm::franchise::{FranchiseState, PriorKernels, Seat};
use pexsbm::network::SupraNetwork;
use statrs::function::beta::ln_beta;

pub fn layer_of(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(j, &s)| std::iter::repeat_n(j, s))
        .collect()
}

fn log_phi(k: &EppfKernel, freqs: &[usize]) -> f64 {
    if freqs.is_empty() {
        0.0
    } else {
        k.log_phi(freqs).unwrap()
    }
}

/// Every seat of the next layer-`j` node with its probability, each one a
/// ratio of EPPFs before and after the move.
pub fn oracle_seats(state: &FranchiseState, j: usize, k: &PriorKernels) -> Vec<(Seat, f64)> {
    let q = state.layer_frequencies(j);
    let ell = state.root_frequencies();
    let base_q = log_phi(&k.layer, &q);
    let base_l = log_phi(&k.root, &ell);
    let mut out = Vec::new();
    for t in 0..q.len() {
        let mut q2 = q.clone();
        q2[t] += 1;
        out.push((Seat::Existing(t), (log_phi(&k.layer, &q2) - base_q).exp()));
    }
    let mut q2 = q.clone();
    q2.push(1);
    let open = log_phi(&k.layer, &q2) - base_q;
    for h in 0..=ell.len() {
        let mut l2 = ell.clone();
        if h < ell.len() {
            l2[h] += 1;
        } else {
            l2.push(1);
        }
        let p = (open + log_phi(&k.root, &l2) - base_l).exp();
        out.push((Seat::NewSubgroup((h < ell.len()).then_some(h)), p));
    }
    out
}

/// Probability that the next node of layer `j` takes each profile slot
/// (the last entry is a new profile).
pub fn oracle_marginal(state: &FranchiseState, j: usize, k: &PriorKernels) -> Vec<f64> {
    let h_count = state.num_profiles();
    let mut out = vec![0.0; h_count + 1];
    for (seat, p) in oracle_seats(state, j, k) {
        let h = match seat {
            Seat::Existing(t) => state.subgroups(j)[t].profile,
            Seat::NewSubgroup(Some(h)) => h,
            Seat::NewSubgroup(None) => h_count,
        };
        out[h] += p;
    }
    out
}

/// `P(z_v = z_u)` for two new nodes of layers `j` and `jp`.
pub fn oracle_coclustering(state: &FranchiseState, j: usize, jp: usize, k: &PriorKernels) -> f64 {
    let mut s = state.clone();
    s.push_unassigned(&[j]).unwrap();
    let v = s.num_nodes() - 1;
    let mut total = 0.0;
    for (seat, p) in oracle_seats(&s, j, k) {
        let h = s.insert_node(v, seat).unwrap();
        total += p * oracle_marginal(&s, jp, k)[h];
        s.remove_node(v).unwrap();
    }
    total
}

/// Collapsed log-likelihood from scratch, skipping every dyad that touches
/// a node in `skip`.
pub fn brute_log_lik(net: &SupraNetwork, z: &[usize], a: f64, b: f64, skip: Option<usize>) -> f64 {
    let h = z.iter().max().map_or(0, |m| m + 1);
    let mut m = vec![vec![0.0; h]; h];
    let mut mb = vec![vec![0.0; h]; h];
    for v in 0..z.len() {
        for u in 0..v {
            if Some(v) == skip || Some(u) == skip {
                continue;
            }
            let (x, y) = (z[v].min(z[u]), z[v].max(z[u]));
            if net.has_edge(v, u) {
                m[x][y] += 1.0;
            } else {
                mb[x][y] += 1.0;
            }
        }
    }
    let mut out = 0.0;
    for x in 0..h {
        for y in x..h {
            out += ln_beta(a + m[x][y], b + mb[x][y]) - ln_beta(a, b);
        }
    }
    out
}

/// Every set partition of `0..n` as canonical labels.
pub fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn go(n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for l in 0..=max {
            cur.push(l);
            go(n, cur, if l == max { max + 1 } else { max }, out);
            cur.pop();
        }
    }
    go(n, &mut cur, 0, &mut out);
    out
}

/// Two-pass similarity matrix.
pub fn two_pass_similarity(samples: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let n = samples[0].len();
    let mut c = vec![vec![0.0; n]; n];
    for v in 0..n {
        for u in 0..n {
            let hits = samples.iter().filter(|z| z[v] == z[u]).count();
            c[v][u] = hits as f64 / samples.len() as f64;
        }
    }
    c
}

/// Batch-means standard error of the mean of a 0/1 series.
pub fn batch_se(series: &[f64], batches: usize) -> f64 {
    let size = series.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| series[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}
