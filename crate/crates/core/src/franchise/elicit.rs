//! Homophily checks: is a node more likely to join a profile already present
//! in its own layer than one that is not?

use serde::Serialize;

use super::{marginal_urn, FranchiseState, PriorKernels};
use crate::eppf::EppfKernel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ElicitationReport {
    /// Sufficient hyperparameter condition (`θ ≤ V_j − 1` for H-DP, the
    /// simplified stable bound for H-NSP). `None` for other kernels.
    pub condition_holds: Option<bool>,
    /// The sharper condition that also depends on the current counts.
    pub state_condition: Option<bool>,
    /// `P(z_v ∈ H_j)`: a profile already present in the layer.
    pub within_prob: f64,
    /// `P(z_v ∈ H ∖ H_j)`: a profile present only in other layers.
    pub across_prob: f64,
    /// `P(z_v` is a brand-new profile`)`.
    pub new_prob: f64,
}

impl ElicitationReport {
    /// `P(z_v ∉ H_j)`.
    pub fn outside_prob(&self) -> f64 {
        self.across_prob + self.new_prob
    }
}

/// Evaluates the homophily probabilities for the next node of layer `j`,
/// `state` being the allocation of every other node.
pub fn elicitation_check(state: &FranchiseState, j: usize, kernels: &PriorKernels) -> ElicitationReport {
    let urn = marginal_urn(state, j, kernels);
    let h_count = state.num_profiles();
    let (mut within, mut across) = (0.0, 0.0);
    let mut profiles_in_layer = 0usize;
    for (h, &p) in urn[..h_count].iter().enumerate() {
        if state.ell(j, h) > 0 {
            within += p;
            profiles_in_layer += 1;
        } else {
            across += p;
        }
    }
    let n = state.layer_occupancy(j) as f64;
    let l = state.total_subgroups() as f64;
    let k = state.layer_subgroup_count(j) as f64;
    let (condition_holds, state_condition) = match (&kernels.layer, &kernels.root) {
        (EppfKernel::Dirichlet { theta }, EppfKernel::Dirichlet { theta: theta0 }) => (
            Some(*theta <= n),
            (l > 0.0).then(|| *theta <= n * (theta0 / l + 1.0)),
        ),
        (EppfKernel::Stable { sigma }, EppfKernel::Stable { sigma: sigma0 }) => {
            let d = state.num_layers() as f64;
            let simple = n >= 1.0 && *sigma <= 0.5 / (1.0 + n * sigma0 / d);
            let sharp = (k > 0.0)
                .then(|| sigma * (1.0 + profiles_in_layer as f64 * sigma0 / l) <= n / (2.0 * k));
            (Some(simple), sharp)
        }
        _ => (None, None),
    };
    ElicitationReport {
        condition_holds,
        state_condition,
        within_prob: within,
        across_prob: across,
        new_prob: urn[h_count],
    }
}
