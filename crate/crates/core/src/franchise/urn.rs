//! Joint `(profile, subgroup)` conditionals and the marginal profile urn for
//! one extra node of a given layer.

use super::{FranchiseState, PriorKernels};
use crate::eppf::EppfKernel;
use crate::log_sum_exp;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExistingEntry {
    /// Subgroup slot in the layer.
    pub subgroup: usize,
    /// Profile slot carried by that subgroup.
    pub profile: usize,
    pub prob: f64,
}

/// Probabilities over `(h, τ)` for the next node of `layer`.
///
/// Only the non-zero entries are stored: one per existing subgroup (at the
/// profile it carries) and one per profile `h ∈ [H+1]` for opening a new
/// subgroup, with index `H` standing for a brand-new profile.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    pub layer: usize,
    pub existing: Vec<ExistingEntry>,
    pub new_subgroup: Vec<f64>,
}

impl JointTable {
    pub fn num_profiles(&self) -> usize {
        self.new_subgroup.len() - 1
    }

    /// Full `(H+1) × (ℓ_j·+1)` matrix; the last column is the new subgroup.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let cols = self.existing.len() + 1;
        let mut out = vec![vec![0.0; cols]; self.new_subgroup.len()];
        for (t, e) in self.existing.iter().enumerate() {
            out[e.profile][t] = e.prob;
        }
        for (h, &p) in self.new_subgroup.iter().enumerate() {
            out[h][cols - 1] = p;
        }
        out
    }

    /// Sums over `τ`: the marginal probability of every profile.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut out = self.new_subgroup.clone();
        for e in &self.existing {
            out[e.profile] += e.prob;
        }
        out
    }

    pub fn total(&self) -> f64 {
        self.existing.iter().map(|e| e.prob).sum::<f64>() + self.new_subgroup.iter().sum::<f64>()
    }
}

/// Log-weights (exact log-probabilities up to rounding) of every non-zero
/// cell: `existing[t]` for subgroup slot `t`, `new[h]` for a new subgroup
/// with profile `h`, `new[H]` for a new profile.
pub(crate) fn fill_log_joint(
    state: &FranchiseState,
    j: usize,
    kernels: &PriorKernels,
    generic: bool,
    existing: &mut Vec<f64>,
    new: &mut Vec<f64>,
) {
    existing.clear();
    new.clear();
    let n = state.layer_occupancy(j);
    let k = state.layer_subgroup_count(j);
    let l = state.total_subgroups();
    let h_count = state.num_profiles();
    if !generic && kernels.has_closed_form() {
        let (layer, root) = (&kernels.layer, &kernels.root);
        existing.extend(state.subgroups(j).iter().map(|s| layer.ln_existing_ratio(s.size, n)));
        let ln_new = layer.ln_new_ratio(k, n);
        new.extend(
            state
                .profiles()
                .iter()
                .map(|p| ln_new + root.ln_existing_ratio(p.subgroups, l)),
        );
        new.push(ln_new + root.ln_new_ratio(h_count, l));
        return;
    }
    let mut freqs = state.layer_frequencies(j);
    let ln_new = generic_ratios(&kernels.layer, &mut freqs, existing);
    existing.pop();
    let mut root = state.root_frequencies();
    generic_ratios(&kernels.root, &mut root, new);
    let root_new = new.pop().expect("ratios always include the new block");
    for x in new.iter_mut() {
        *x += ln_new;
    }
    new.push(ln_new + root_new);
}

/// Pushes `log Φ(freqs + e_t) − log Φ(freqs)` for every `t` into `out`
/// followed by the new-block ratio, and returns the new-block ratio.
fn generic_ratios(kernel: &EppfKernel, freqs: &mut Vec<usize>, out: &mut Vec<f64>) -> f64 {
    let base = kernel.log_phi_unchecked(freqs);
    for t in 0..freqs.len() {
        freqs[t] += 1;
        out.push(kernel.log_phi_unchecked(freqs) - base);
        freqs[t] -= 1;
    }
    freqs.push(1);
    let r = kernel.log_phi_unchecked(freqs) - base;
    freqs.pop();
    out.push(r);
    r
}

fn build_table(state: &FranchiseState, j: usize, kernels: &PriorKernels, generic: bool) -> JointTable {
    let (mut existing, mut new) = (Vec::new(), Vec::new());
    fill_log_joint(state, j, kernels, generic, &mut existing, &mut new);
    // order-independent normalizer
    let mut all: Vec<f64> = existing.iter().chain(new.iter()).copied().collect();
    all.sort_by(f64::total_cmp);
    let lse = log_sum_exp(all);
    JointTable {
        layer: j,
        existing: state
            .subgroups(j)
            .iter()
            .zip(&existing)
            .enumerate()
            .map(|(t, (s, &lw))| ExistingEntry {
                subgroup: t,
                profile: s.profile,
                prob: (lw - lse).exp(),
            })
            .collect(),
        new_subgroup: new.iter().map(|&lw| (lw - lse).exp()).collect(),
    }
}

/// Joint conditional of `(z_v, w_v)` for a node of layer `j` given the
/// state without it. Closed-form ratios are used when both kernels have one.
pub fn joint_conditional(state: &FranchiseState, j: usize, kernels: &PriorKernels) -> JointTable {
    build_table(state, j, kernels, false)
}

/// As [`joint_conditional`], always evaluating explicit EPPF ratios.
pub fn joint_conditional_generic(
    state: &FranchiseState,
    j: usize,
    kernels: &PriorKernels,
) -> JointTable {
    build_table(state, j, kernels, true)
}

/// Marginal profile urn for a node of layer `j`: entry `h < H` is profile
/// slot `h`, entry `H` is a new profile.
pub fn marginal_urn(state: &FranchiseState, j: usize, kernels: &PriorKernels) -> Vec<f64> {
    let n = state.layer_occupancy(j) as f64;
    let k = state.layer_subgroup_count(j) as f64;
    let l = state.total_subgroups() as f64;
    let h_count = state.num_profiles() as f64;
    match (&kernels.layer, &kernels.root) {
        (EppfKernel::Dirichlet { theta }, EppfKernel::Dirichlet { theta: theta0 }) => {
            let layer_new = theta / (theta + n);
            let mut out: Vec<f64> = state
                .profiles()
                .iter()
                .map(|p| {
                    p.subgroups as f64 / (theta0 + l) * layer_new
                        + p.layer_nodes[j] as f64 / (theta + n)
                })
                .collect();
            out.push(theta0 / (theta0 + l) * layer_new);
            out
        }
        (EppfKernel::Stable { sigma }, EppfKernel::Stable { sigma: sigma0 }) => {
            let layer_new = if n == 0.0 { 1.0 } else { k * sigma / n };
            let mut out: Vec<f64> = state
                .profiles()
                .iter()
                .map(|p| {
                    let joined = if n == 0.0 {
                        0.0
                    } else {
                        (p.layer_nodes[j] as f64 - p.layer_subgroups[j] as f64 * sigma) / n
                    };
                    (p.subgroups as f64 - sigma0) / l * layer_new + joined
                })
                .collect();
            let root_new = if l == 0.0 { 1.0 } else { h_count * sigma0 / l };
            out.push(root_new * layer_new);
            out
        }
        _ => joint_conditional(state, j, kernels).row_sums(),
    }
}

/// Row sums of [`joint_conditional_generic`].
pub fn marginal_urn_generic(state: &FranchiseState, j: usize, kernels: &PriorKernels) -> Vec<f64> {
    joint_conditional_generic(state, j, kernels).row_sums()
}
