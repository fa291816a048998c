//! Probability that two further nodes end up with the same profile.

use super::{FranchiseError, FranchiseState, PriorKernels};
use crate::eppf::EppfKernel;

/// `P(z_v = z_u | state)` for two nodes of layers `j` and `jp` that are not
/// in `state`. H-DP and H-NSP use their closed forms; any other pair of
/// kernels, and H-NSP on states with an empty layer or no subgroups at all,
/// go through [`coclustering_general`].
pub fn coclustering_probability(
    state: &FranchiseState,
    j: usize,
    jp: usize,
    kernels: &PriorKernels,
) -> f64 {
    match (&kernels.layer, &kernels.root) {
        (EppfKernel::Dirichlet { theta }, EppfKernel::Dirichlet { theta: theta0 }) => {
            hdp(state, j, jp, *theta, *theta0)
        }
        (EppfKernel::Stable { sigma }, EppfKernel::Stable { sigma: sigma0 })
            if state.layer_occupancy(j) > 0
                && state.layer_occupancy(jp) > 0
                && state.total_subgroups() > 0 =>
        {
            hnsp(state, j, jp, *sigma, *sigma0)
        }
        _ => coclustering_general(state, j, jp, kernels),
    }
}

/// Removes `v` and `u` from a copy of `state` and evaluates their
/// co-clustering probability.
pub fn coclustering_for_nodes(
    state: &FranchiseState,
    v: usize,
    u: usize,
    kernels: &PriorKernels,
) -> Result<f64, FranchiseError> {
    if v == u {
        return Err(FranchiseError::SameNode);
    }
    let mut reduced = state.clone();
    for x in [v, u] {
        if reduced.is_assigned(x) {
            reduced.remove_node(x)?;
        }
    }
    Ok(coclustering_probability(&reduced, state.layer_of(v), state.layer_of(u), kernels))
}

/// `Σ_h ℓ_·h (ℓ_·h + 1)`
fn root_square_sum(state: &FranchiseState) -> f64 {
    state
        .profiles()
        .iter()
        .map(|p| {
            let l = p.subgroups as f64;
            l * (l + 1.0)
        })
        .sum()
}

fn hdp(state: &FranchiseState, j: usize, jp: usize, theta: f64, theta0: f64) -> f64 {
    let l = state.total_subgroups() as f64;
    let root2 =
        theta * theta / ((theta0 + l) * (theta0 + l + 1.0)) * (root_square_sum(state) + theta0);
    let nj = state.layer_occupancy(j) as f64;
    if j == jp {
        let (mut s_nn, mut s_nl) = (0.0, 0.0);
        for p in state.profiles() {
            let n = p.layer_nodes[j] as f64;
            s_nn += n * (n + 1.0);
            s_nl += n * p.subgroups as f64;
        }
        (s_nn + theta * (1.0 + 2.0 / (theta0 + l) * s_nl) + root2)
            / ((theta + nj) * (theta + nj + 1.0))
    } else {
        let njp = state.layer_occupancy(jp) as f64;
        let (mut s_nn, mut s_ln) = (0.0, 0.0);
        for p in state.profiles() {
            let (a, b) = (p.layer_nodes[j] as f64, p.layer_nodes[jp] as f64);
            s_nn += a * b;
            s_ln += p.subgroups as f64 * (a + b);
        }
        (s_nn + theta / (theta0 + l) * s_ln + root2) / ((theta + nj) * (theta + njp))
    }
}

fn hnsp(state: &FranchiseState, j: usize, jp: usize, sigma: f64, sigma0: f64) -> f64 {
    let l = state.total_subgroups() as f64;
    let h = state.num_profiles() as f64;
    let s_yy: f64 = state
        .profiles()
        .iter()
        .map(|p| {
            let y = p.subgroups as f64 - sigma0;
            y * (y + 1.0)
        })
        .sum();
    let root2 = (s_yy + h * sigma0 * (1.0 - sigma0)) / (l * (l + 1.0));
    let x = |p: &super::Profile, j: usize| p.layer_nodes[j] as f64 - p.layer_subgroups[j] as f64 * sigma;
    let nj = state.layer_occupancy(j) as f64;
    let kj = state.layer_subgroup_count(j) as f64;
    if j == jp {
        let (mut s_xx, mut s_xy) = (0.0, 0.0);
        for p in state.profiles() {
            let xj = x(p, j);
            s_xx += xj * (xj + 1.0);
            s_xy += xj * (p.subgroups as f64 - sigma0);
        }
        (s_xx
            + kj * sigma * ((1.0 - sigma) + 2.0 / l * s_xy)
            + kj * (kj + 1.0) * sigma * sigma * root2)
            / (nj * (nj + 1.0))
    } else {
        let njp = state.layer_occupancy(jp) as f64;
        let kjp = state.layer_subgroup_count(jp) as f64;
        let (mut s_xx, mut s_jy, mut s_jpy) = (0.0, 0.0, 0.0);
        for p in state.profiles() {
            let y = p.subgroups as f64 - sigma0;
            let (a, b) = (x(p, j), x(p, jp));
            s_xx += a * b;
            s_jy += a * y;
            s_jpy += b * y;
        }
        (s_xx + sigma / l * (kj * s_jpy + kjp * s_jy) + kj * kjp * sigma * sigma * root2)
            / (nj * njp)
    }
}

/// Co-clustering from explicit EPPF evaluations, valid for any kernels.
pub fn coclustering_general(
    state: &FranchiseState,
    j: usize,
    jp: usize,
    kernels: &PriorKernels,
) -> f64 {
    let (layer, root) = (&kernels.layer, &kernels.root);
    let h_count = state.num_profiles();
    let mut rf = state.root_frequencies();
    let r0 = root.log_phi_unchecked(&rf);
    let mut root_ratio = |h: Option<usize>, add: usize| -> f64 {
        let out = match h {
            Some(h) => {
                rf[h] += add;
                let x = root.log_phi_unchecked(&rf);
                rf[h] -= add;
                x
            }
            None => {
                rf.push(add);
                let x = root.log_phi_unchecked(&rf);
                rf.pop();
                x
            }
        };
        (out - r0).exp()
    };
    let b: Vec<f64> = (0..h_count).map(|h| root_ratio(Some(h), 1)).collect();
    let e: Vec<f64> = (0..h_count).map(|h| root_ratio(Some(h), 2)).collect();
    let b_new = root_ratio(None, 1);
    let e_new = root_ratio(None, 2);

    let layer_ratio = |q: &mut Vec<usize>, base: f64, bumps: &[usize], extra: &[usize]| -> f64 {
        for &t in bumps {
            q[t] += 1;
        }
        q.extend_from_slice(extra);
        let x = layer.log_phi_unchecked(q);
        q.truncate(q.len() - extra.len());
        for &t in bumps {
            q[t] -= 1;
        }
        (x - base).exp()
    };
    let profile_of = |jj: usize| -> Vec<usize> {
        state.subgroups(jj).iter().map(|s| s.profile).collect()
    };

    if j == jp {
        let mut q = state.layer_frequencies(j);
        let prof = profile_of(j);
        let d = layer.log_phi_unchecked(&q);
        let c1 = layer_ratio(&mut q, d, &[], &[2]);
        let f = layer_ratio(&mut q, d, &[], &[1, 1]);
        let (mut a, mut c2) = (vec![0.0; h_count], vec![0.0; h_count]);
        for t in 0..q.len() {
            let h = prof[t];
            a[h] += layer_ratio(&mut q, d, &[t, t], &[]);
            c2[h] += layer_ratio(&mut q, d, &[t], &[1]);
            for tp in (t + 1)..q.len() {
                if prof[tp] == h {
                    a[h] += 2.0 * layer_ratio(&mut q, d, &[t, tp], &[]);
                }
            }
        }
        let mut p = b_new * c1 + e_new * f;
        for h in 0..h_count {
            p += a[h] + b[h] * (c1 + 2.0 * c2[h]) + e[h] * f;
        }
        p
    } else {
        let side = |jj: usize| -> (Vec<f64>, f64) {
            let mut q = state.layer_frequencies(jj);
            let prof = profile_of(jj);
            let d = layer.log_phi_unchecked(&q);
            let mut a = vec![0.0; h_count];
            for t in 0..q.len() {
                a[prof[t]] += layer_ratio(&mut q, d, &[t], &[]);
            }
            (a, layer_ratio(&mut q, d, &[], &[1]))
        };
        let (aj, cj) = side(j);
        let (ajp, cjp) = side(jp);
        let mut p = e_new * cj * cjp;
        for h in 0..h_count {
            p += aj[h] * ajp[h] + b[h] * (cj * ajp[h] + cjp * aj[h]) + e[h] * cj * cjp;
        }
        p
    }
}
