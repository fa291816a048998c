//! Chinese-restaurant-franchise state over nodes and the closed-form
//! probabilities defined on it.
//!
//! Nodes sit at within-layer subgroups ("tables"); each subgroup carries a
//! sociability profile ("dish") drawn from a list shared by all layers. The
//! profile of a node is its cluster label.
//!
//! Profiles and subgroups live in slot vectors. Deleting one moves the last
//! slot into the hole, so slot ids are not order-of-appearance labels; use
//! [`FranchiseState::canonical_z`] and [`FranchiseState::canonical_w`] for
//! those. Every probability in this module depends on counts only, so slot
//! order never changes a value.

mod coclust;
mod elicit;
mod peppf;
mod urn;

pub use coclust::{coclustering_for_nodes, coclustering_general, coclustering_probability};
pub use elicit::{elicitation_check, ElicitationReport};
pub use peppf::{
    frequency_array, peppf_log_mass, peppf_log_mass_with_cap, urn_partition_masses,
    PEPPF_DEFAULT_CAP,
};
pub use urn::{
    joint_conditional, joint_conditional_generic, marginal_urn, marginal_urn_generic,
    ExistingEntry, JointTable,
};
pub(crate) use urn::fill_log_joint;

use serde::Serialize;
use thiserror::Error;

use crate::eppf::{EppfError, EppfKernel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FranchiseError {
    #[error("allocation has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("layer {layer} out of range ({num_layers} layers)")]
    BadLayer { layer: usize, num_layers: usize },
    #[error("node {0} is already allocated")]
    AlreadyAssigned(usize),
    #[error("node {0} is not allocated")]
    NotAssigned(usize),
    #[error("subgroup {subgroup} of layer {layer} does not exist")]
    NoSuchSubgroup { layer: usize, subgroup: usize },
    #[error("profile {0} does not exist")]
    NoSuchProfile(usize),
    #[error("subgroup {subgroup} of layer {layer} carries two different profiles")]
    InconsistentSubgroup { layer: usize, subgroup: usize },
    #[error("co-clustering needs two distinct nodes")]
    SameNode,
    #[error("{0} nodes exceed the enumeration cap of {1}")]
    TooLarge(usize, usize),
    #[error("frequency array does not match the layer sizes")]
    BadFrequencies,
    #[error(transparent)]
    Eppf(#[from] EppfError),
}

/// EPPFs of the two hierarchy levels: `layer` partitions each layer into
/// subgroups, `root` assigns profiles to subgroups.
#[derive(Clone, Debug)]
pub struct PriorKernels {
    pub layer: EppfKernel,
    pub root: EppfKernel,
}

impl PriorKernels {
    pub fn new(layer: EppfKernel, root: EppfKernel) -> Self {
        Self { layer, root }
    }

    /// H-DP with layer concentration `theta` and root concentration `theta0`.
    pub fn hdp(theta: f64, theta0: f64) -> Result<Self, EppfError> {
        Ok(Self::new(EppfKernel::dirichlet(theta)?, EppfKernel::dirichlet(theta0)?))
    }

    /// H-NSP with layer discount `sigma` and root discount `sigma0`.
    pub fn hnsp(sigma: f64, sigma0: f64) -> Result<Self, EppfError> {
        Ok(Self::new(EppfKernel::stable(sigma)?, EppfKernel::stable(sigma0)?))
    }

    /// Both levels routed through the generic evaluator.
    pub fn as_generic(&self) -> Self {
        Self::new(self.layer.as_generic(), self.root.as_generic())
    }

    pub fn has_closed_form(&self) -> bool {
        self.layer.has_closed_form() && self.root.has_closed_form()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Subgroup {
    pub profile: usize,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Profile {
    /// `ℓ_·h`
    pub subgroups: usize,
    pub nodes: usize,
    /// `n_jh` per layer.
    pub layer_nodes: Vec<usize>,
    /// `ℓ_jh` per layer.
    pub layer_subgroups: Vec<usize>,
}

impl Profile {
    fn empty(d: usize) -> Self {
        Self {
            subgroups: 0,
            nodes: 0,
            layer_nodes: vec![0; d],
            layer_subgroups: vec![0; d],
        }
    }
}

/// Where to put a node on insertion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Seat {
    /// Join subgroup slot `t` of the node's layer.
    Existing(usize),
    /// Open a subgroup carrying profile slot `h`, or a brand-new profile.
    NewSubgroup(Option<usize>),
}

/// What [`FranchiseState::remove_node`] changed, enough to undo it exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemovalRecord {
    pub node: usize,
    pub layer: usize,
    pub subgroup: usize,
    pub profile: usize,
    /// Set when the subgroup emptied: the slot that was moved into its place.
    pub subgroup_moved_from: Option<usize>,
    /// Set when the profile emptied: the slot that was moved into its place.
    pub profile_moved_from: Option<usize>,
}

impl RemovalRecord {
    pub fn profile_deleted(&self) -> bool {
        self.profile_moved_from.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FranchiseState {
    layer_of: Vec<usize>,
    num_layers: usize,
    z: Vec<Option<usize>>,
    w: Vec<Option<usize>>,
    subgroups: Vec<Vec<Subgroup>>,
    profiles: Vec<Profile>,
    layer_occupancy: Vec<usize>,
    total_subgroups: usize,
}

impl FranchiseState {
    /// A state where no node is allocated yet.
    pub fn empty(layer_of: Vec<usize>, num_layers: usize) -> Result<Self, FranchiseError> {
        if let Some(&layer) = layer_of.iter().find(|&&j| j >= num_layers) {
            return Err(FranchiseError::BadLayer { layer, num_layers });
        }
        let v = layer_of.len();
        Ok(Self {
            layer_of,
            num_layers,
            z: vec![None; v],
            w: vec![None; v],
            subgroups: vec![Vec::new(); num_layers],
            profiles: Vec::new(),
            layer_occupancy: vec![0; num_layers],
            total_subgroups: 0,
        })
    }

    /// Every node alone in its own subgroup with its own profile.
    pub fn singletons(layer_of: Vec<usize>, num_layers: usize) -> Result<Self, FranchiseError> {
        let mut s = Self::empty(layer_of, num_layers)?;
        for v in 0..s.num_nodes() {
            s.insert_node(v, Seat::NewSubgroup(None))?;
        }
        Ok(s)
    }

    /// A single profile shared by one subgroup per layer.
    pub fn one_block(layer_of: Vec<usize>, num_layers: usize) -> Result<Self, FranchiseError> {
        let mut s = Self::empty(layer_of, num_layers)?;
        for v in 0..s.num_nodes() {
            let j = s.layer_of[v];
            let seat = if !s.subgroups[j].is_empty() {
                Seat::Existing(0)
            } else if s.profiles.is_empty() {
                Seat::NewSubgroup(None)
            } else {
                Seat::NewSubgroup(Some(0))
            };
            s.insert_node(v, seat)?;
        }
        Ok(s)
    }

    /// Builds a state from arbitrary non-negative profile labels `z` and
    /// within-layer subgroup labels `w`. Nodes of one layer sharing a `w`
    /// label must share the `z` label.
    pub fn from_assignment(
        layer_of: Vec<usize>,
        num_layers: usize,
        z: &[usize],
        w: &[usize],
    ) -> Result<Self, FranchiseError> {
        let v = layer_of.len();
        for len in [z.len(), w.len()] {
            if len != v {
                return Err(FranchiseError::LengthMismatch { expected: v, got: len });
            }
        }
        let mut s = Self::empty(layer_of, num_layers)?;
        let mut profile_slot = std::collections::HashMap::new();
        let mut subgroup_slot = std::collections::HashMap::new();
        for node in 0..v {
            let j = s.layer_of[node];
            let seat = match subgroup_slot.get(&(j, w[node])) {
                Some(&(t, zl)) => {
                    if zl != z[node] {
                        return Err(FranchiseError::InconsistentSubgroup {
                            layer: j,
                            subgroup: w[node],
                        });
                    }
                    Seat::Existing(t)
                }
                None => Seat::NewSubgroup(profile_slot.get(&z[node]).copied()),
            };
            let new_profile = matches!(seat, Seat::NewSubgroup(None));
            s.insert_node(node, seat)?;
            if new_profile {
                profile_slot.insert(z[node], s.profiles.len() - 1);
            }
            subgroup_slot.insert((j, w[node]), (s.w[node].unwrap(), z[node]));
        }
        Ok(s)
    }

    /// Appends unallocated nodes with the given layers; returns the index
    /// of the first one.
    pub fn push_unassigned(&mut self, layers: &[usize]) -> Result<usize, FranchiseError> {
        if let Some(&j) = layers.iter().find(|&&j| j >= self.num_layers) {
            return Err(FranchiseError::BadLayer { layer: j, num_layers: self.num_layers });
        }
        let first = self.layer_of.len();
        self.layer_of.extend_from_slice(layers);
        self.z.resize(self.layer_of.len(), None);
        self.w.resize(self.layer_of.len(), None);
        Ok(first)
    }

    pub fn num_nodes(&self) -> usize {
        self.layer_of.len()
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn layer_of(&self, v: usize) -> usize {
        self.layer_of[v]
    }

    pub fn layers(&self) -> &[usize] {
        &self.layer_of
    }

    pub fn is_assigned(&self, v: usize) -> bool {
        self.z[v].is_some()
    }

    /// Profile slot of node `v`.
    pub fn profile_of(&self, v: usize) -> Option<usize> {
        self.z[v]
    }

    /// Subgroup slot (within its layer) of node `v`.
    pub fn subgroup_of(&self, v: usize) -> Option<usize> {
        self.w[v]
    }

    /// `H`
    pub fn num_profiles(&self) -> usize {
        self.profiles.len()
    }

    /// `|ℓ|`
    pub fn total_subgroups(&self) -> usize {
        self.total_subgroups
    }

    /// `ℓ_j·`
    pub fn layer_subgroup_count(&self, j: usize) -> usize {
        self.subgroups[j].len()
    }

    /// Allocated nodes in layer `j`.
    pub fn layer_occupancy(&self, j: usize) -> usize {
        self.layer_occupancy[j]
    }

    pub fn num_assigned(&self) -> usize {
        self.layer_occupancy.iter().sum()
    }

    pub fn subgroups(&self, j: usize) -> &[Subgroup] {
        &self.subgroups[j]
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn profile(&self, h: usize) -> &Profile {
        &self.profiles[h]
    }

    /// `n_jh`
    pub fn n(&self, j: usize, h: usize) -> usize {
        self.profiles[h].layer_nodes[j]
    }

    /// `ℓ_jh`
    pub fn ell(&self, j: usize, h: usize) -> usize {
        self.profiles[h].layer_subgroups[j]
    }

    /// `q_jh`: sizes of the layer-`j` subgroups carrying profile `h`, in slot order.
    pub fn q(&self, j: usize, h: usize) -> Vec<usize> {
        self.subgroups[j]
            .iter()
            .filter(|s| s.profile == h)
            .map(|s| s.size)
            .collect()
    }

    /// All subgroup sizes of layer `j`, in slot order.
    pub fn layer_frequencies(&self, j: usize) -> Vec<usize> {
        self.subgroups[j].iter().map(|s| s.size).collect()
    }

    /// `(ℓ_·1, ..., ℓ_·H)` in slot order.
    pub fn root_frequencies(&self) -> Vec<usize> {
        self.profiles.iter().map(|p| p.subgroups).collect()
    }

    /// Moves node `v` into `seat` and returns its profile slot.
    pub fn insert_node(&mut self, v: usize, seat: Seat) -> Result<usize, FranchiseError> {
        if self.z[v].is_some() {
            return Err(FranchiseError::AlreadyAssigned(v));
        }
        let j = self.layer_of[v];
        let t = match seat {
            Seat::Existing(t) => {
                if t >= self.subgroups[j].len() {
                    return Err(FranchiseError::NoSuchSubgroup { layer: j, subgroup: t });
                }
                t
            }
            Seat::NewSubgroup(h) => {
                let h = match h {
                    Some(h) if h >= self.profiles.len() => {
                        return Err(FranchiseError::NoSuchProfile(h))
                    }
                    Some(h) => h,
                    None => {
                        self.profiles.push(Profile::empty(self.num_layers));
                        self.profiles.len() - 1
                    }
                };
                self.open_subgroup(j, h);
                self.subgroups[j].len() - 1
            }
        };
        let sg = &mut self.subgroups[j][t];
        sg.size += 1;
        let h = sg.profile;
        let p = &mut self.profiles[h];
        p.nodes += 1;
        p.layer_nodes[j] += 1;
        self.layer_occupancy[j] += 1;
        self.z[v] = Some(h);
        self.w[v] = Some(t);
        Ok(h)
    }

    fn open_subgroup(&mut self, j: usize, h: usize) {
        self.subgroups[j].push(Subgroup { profile: h, size: 0 });
        let p = &mut self.profiles[h];
        p.subgroups += 1;
        p.layer_subgroups[j] += 1;
        self.total_subgroups += 1;
    }

    /// Takes node `v` out, deleting its subgroup and profile if they empty.
    pub fn remove_node(&mut self, v: usize) -> Result<RemovalRecord, FranchiseError> {
        let (h, t) = match (self.z[v], self.w[v]) {
            (Some(h), Some(t)) => (h, t),
            _ => return Err(FranchiseError::NotAssigned(v)),
        };
        let j = self.layer_of[v];
        self.z[v] = None;
        self.w[v] = None;
        self.layer_occupancy[j] -= 1;
        let p = &mut self.profiles[h];
        p.nodes -= 1;
        p.layer_nodes[j] -= 1;
        self.subgroups[j][t].size -= 1;
        let mut record = RemovalRecord {
            node: v,
            layer: j,
            subgroup: t,
            profile: h,
            subgroup_moved_from: None,
            profile_moved_from: None,
        };
        if self.subgroups[j][t].size == 0 {
            let last = self.subgroups[j].len() - 1;
            self.subgroups[j].swap_remove(t);
            if last != t {
                self.relabel_subgroup(j, last, t);
            }
            record.subgroup_moved_from = Some(last);
            let p = &mut self.profiles[h];
            p.subgroups -= 1;
            p.layer_subgroups[j] -= 1;
            self.total_subgroups -= 1;
            if p.subgroups == 0 {
                let last = self.profiles.len() - 1;
                self.profiles.swap_remove(h);
                if last != h {
                    self.relabel_profile(last, h);
                }
                record.profile_moved_from = Some(last);
            }
        }
        Ok(record)
    }

    /// Reverts a [`RemovalRecord`] produced by the most recent removal.
    pub fn undo(&mut self, record: &RemovalRecord) -> Result<(), FranchiseError> {
        let RemovalRecord {
            node,
            layer: j,
            subgroup: t,
            profile: h,
            ..
        } = *record;
        if let Some(last) = record.profile_moved_from {
            if last != h {
                let moved = std::mem::replace(&mut self.profiles[h], Profile::empty(self.num_layers));
                self.profiles.push(moved);
                self.relabel_profile(h, last);
            } else {
                self.profiles.push(Profile::empty(self.num_layers));
            }
        }
        if let Some(last) = record.subgroup_moved_from {
            let fresh = Subgroup { profile: h, size: 0 };
            if last != t {
                let moved = std::mem::replace(&mut self.subgroups[j][t], fresh);
                self.subgroups[j].push(moved);
                self.relabel_subgroup(j, t, last);
            } else {
                self.subgroups[j].push(fresh);
            }
            let p = &mut self.profiles[h];
            p.subgroups += 1;
            p.layer_subgroups[j] += 1;
            self.total_subgroups += 1;
        }
        self.insert_node(node, Seat::Existing(t))?;
        Ok(())
    }

    fn relabel_subgroup(&mut self, j: usize, from: usize, to: usize) {
        for v in 0..self.num_nodes() {
            if self.layer_of[v] == j && self.w[v] == Some(from) {
                self.w[v] = Some(to);
            }
        }
    }

    fn relabel_profile(&mut self, from: usize, to: usize) {
        for z in self.z.iter_mut() {
            if *z == Some(from) {
                *z = Some(to);
            }
        }
        for layer in self.subgroups.iter_mut() {
            for s in layer.iter_mut() {
                if s.profile == from {
                    s.profile = to;
                }
            }
        }
    }

    /// Profile labels `0, 1, ...` in order of first appearance over node
    /// index; unallocated nodes are skipped.
    pub fn canonical_z(&self) -> Vec<usize> {
        canonical_labels(self.z.iter().flatten().copied())
    }

    /// Within-layer subgroup labels `0, 1, ...` in order of first appearance
    /// inside each layer; unallocated nodes are skipped.
    pub fn canonical_w(&self) -> Vec<usize> {
        let mut maps: Vec<Vec<Option<usize>>> = self
            .subgroups
            .iter()
            .map(|s| vec![None; s.len()])
            .collect();
        let mut next = vec![0; self.num_layers];
        let mut out = Vec::new();
        for v in 0..self.num_nodes() {
            if let Some(t) = self.w[v] {
                let j = self.layer_of[v];
                let label = *maps[j][t].get_or_insert_with(|| {
                    next[j] += 1;
                    next[j] - 1
                });
                out.push(label);
            }
        }
        out
    }

    /// Recounts everything from `z`, `w` and compares with the stored tallies.
    pub fn check_invariants(&self) -> Result<(), String> {
        let d = self.num_layers;
        let mut sizes: Vec<Vec<usize>> = self.subgroups.iter().map(|s| vec![0; s.len()]).collect();
        let mut occ = vec![0; d];
        let mut nodes = vec![vec![0; d]; self.profiles.len()];
        for v in 0..self.num_nodes() {
            match (self.z[v], self.w[v]) {
                (None, None) => {}
                (Some(h), Some(t)) => {
                    let j = self.layer_of[v];
                    let sg = self.subgroups[j].get(t).ok_or(format!("node {v}: bad subgroup {t}"))?;
                    if sg.profile != h {
                        return Err(format!("node {v}: z={h} but its subgroup carries {}", sg.profile));
                    }
                    sizes[j][t] += 1;
                    occ[j] += 1;
                    nodes[h][j] += 1;
                }
                _ => return Err(format!("node {v}: half-assigned")),
            }
        }
        if occ != self.layer_occupancy {
            return Err("layer occupancy mismatch".into());
        }
        let mut ell = vec![vec![0; d]; self.profiles.len()];
        for (j, layer) in self.subgroups.iter().enumerate() {
            for (t, sg) in layer.iter().enumerate() {
                if sg.size == 0 || sg.size != sizes[j][t] {
                    return Err(format!("subgroup ({j},{t}) size mismatch"));
                }
                ell[sg.profile][j] += 1;
            }
        }
        let mut total = 0;
        for (h, p) in self.profiles.iter().enumerate() {
            if p.subgroups == 0 {
                return Err(format!("profile {h} is empty"));
            }
            if p.layer_nodes != nodes[h] || p.layer_subgroups != ell[h] {
                return Err(format!("profile {h} tallies mismatch"));
            }
            if p.subgroups != ell[h].iter().sum::<usize>() || p.nodes != nodes[h].iter().sum::<usize>() {
                return Err(format!("profile {h} totals mismatch"));
            }
            total += p.subgroups;
        }
        if total != self.total_subgroups {
            return Err("total subgroup count mismatch".into());
        }
        Ok(())
    }
}

/// Relabels `labels` to `0, 1, ...` in order of first appearance.
pub fn canonical_labels(labels: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .into_iter()
        .map(|l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}
