//! Collapsed beta-binomial likelihood of a network given a node partition.

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::network::{induced_counts as raw_counts, NetworkError, SupraNetwork};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LikelihoodError {
    #[error("beta hyperparameters must be positive, got a = {0}, b = {1}")]
    BadHyper(f64, f64),
    #[error("tallies have length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("tallies for group {group} sum to {got}, but the group has {expected} nodes")]
    TallyMismatch { group: usize, expected: usize, got: usize },
    #[error("group {0} does not exist")]
    NoSuchGroup(usize),
    #[error("group {0} is not empty")]
    GroupNotEmpty(usize),
    #[error("allocation has length {got}, expected {expected}")]
    AllocationLength { expected: usize, got: usize },
}

/// Tables of `ln Γ(a+k)`, `ln Γ(b+k)` and `ln Γ(a+b+k)` for quick
/// `ln B(a+m, b+m̄)` lookups.
#[derive(Clone, Debug)]
struct LnBetaCache {
    a: f64,
    b: f64,
    ln_a: Vec<f64>,
    ln_b: Vec<f64>,
    ln_ab: Vec<f64>,
}

impl LnBetaCache {
    fn new(a: f64, b: f64, max_k: usize) -> Self {
        let table = |x: f64| (0..=max_k).map(|k| ln_gamma(x + k as f64)).collect();
        Self {
            a,
            b,
            ln_a: table(a),
            ln_b: table(b),
            ln_ab: table(a + b),
        }
    }

    #[inline]
    fn ln_beta(&self, m: usize, mbar: usize) -> f64 {
        let t = m + mbar;
        if t < self.ln_ab.len() {
            self.ln_a[m] + self.ln_b[mbar] - self.ln_ab[t]
        } else {
            ln_beta(self.a + m as f64, self.b + mbar as f64)
        }
    }
}

pub fn ln_beta(x: f64, y: f64) -> f64 {
    ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)
}

/// Edge and non-edge tallies between groups, kept in step with node moves.
///
/// Group ids are slots: [`BlockCounts::swap_remove_group`] moves the last
/// group into the freed slot, exactly like the franchise state does with
/// profiles, so both can share one indexing.
#[derive(Clone, Debug)]
pub struct BlockCounts {
    a: f64,
    b: f64,
    m: Vec<Vec<usize>>,
    mbar: Vec<Vec<usize>>,
    sizes: Vec<usize>,
    cache: LnBetaCache,
}

impl PartialEq for BlockCounts {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a
            && self.b == other.b
            && self.m == other.m
            && self.mbar == other.mbar
            && self.sizes == other.sizes
    }
}

impl BlockCounts {
    /// No groups yet; `max_dyads` sizes the log-gamma cache.
    pub fn empty(a: f64, b: f64, max_dyads: usize) -> Result<Self, LikelihoodError> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(LikelihoodError::BadHyper(a, b));
        }
        Ok(Self {
            a,
            b,
            m: Vec::new(),
            mbar: Vec::new(),
            sizes: Vec::new(),
            cache: LnBetaCache::new(a, b, max_dyads + 1),
        })
    }

    /// Counts for allocation `z` with labels `0..H`, every label used.
    pub fn from_allocation(
        net: &SupraNetwork,
        z: &[usize],
        a: f64,
        b: f64,
    ) -> Result<Self, LikelihoodError> {
        let (m, mbar) = raw_counts(net, z).map_err(|e| match e {
            NetworkError::LengthMismatch { expected, got } => {
                LikelihoodError::AllocationLength { expected, got }
            }
            _ => unreachable!("induced_counts only fails on length"),
        })?;
        let mut out = Self::empty(a, b, net.num_dyads())?;
        out.sizes = vec![0; m.len()];
        for &h in z {
            out.sizes[h] += 1;
        }
        let cast = |x: Vec<Vec<u64>>| -> Vec<Vec<usize>> {
            x.into_iter()
                .map(|r| r.into_iter().map(|v| v as usize).collect())
                .collect()
        };
        out.m = cast(m);
        out.mbar = cast(mbar);
        Ok(out)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn num_groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, h: usize) -> usize {
        self.sizes[h]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn m(&self, h: usize, g: usize) -> usize {
        self.m[h][g]
    }

    pub fn mbar(&self, h: usize, g: usize) -> usize {
        self.mbar[h][g]
    }

    #[inline]
    fn ln_beta_at(&self, m: usize, mbar: usize) -> f64 {
        self.cache.ln_beta(m, mbar)
    }

    /// `ln B(a, b)`
    pub fn ln_beta_prior(&self) -> f64 {
        self.cache.ln_beta(0, 0)
    }

    /// `Σ_{h ≤ h'} [ln B(a+m, b+m̄) − ln B(a, b)]`
    pub fn log_marginal_likelihood(&self) -> f64 {
        let base = self.ln_beta_prior();
        let mut out = 0.0;
        for h in 0..self.num_groups() {
            for g in h..self.num_groups() {
                out += self.ln_beta_at(self.m[h][g], self.mbar[h][g]) - base;
            }
        }
        out
    }

    /// Opens an empty group in the next slot and returns its id.
    pub fn push_group(&mut self) -> usize {
        for row in self.m.iter_mut().chain(self.mbar.iter_mut()) {
            row.push(0);
        }
        let h = self.sizes.len();
        self.m.push(vec![0; h + 1]);
        self.mbar.push(vec![0; h + 1]);
        self.sizes.push(0);
        h
    }

    /// Deletes empty group `h`, moving the last group into its slot.
    pub fn swap_remove_group(&mut self, h: usize) -> Result<(), LikelihoodError> {
        if h >= self.num_groups() {
            return Err(LikelihoodError::NoSuchGroup(h));
        }
        if self.sizes[h] != 0 {
            return Err(LikelihoodError::GroupNotEmpty(h));
        }
        for mat in [&mut self.m, &mut self.mbar] {
            mat.swap_remove(h);
            for row in mat.iter_mut() {
                row.swap_remove(h);
            }
        }
        self.sizes.swap_remove(h);
        Ok(())
    }

    /// Edges from `v` to each group, ignoring `v` itself; `groups[u]` is the
    /// group of node `u` or `None` when unallocated.
    pub fn node_tallies(&self, net: &SupraNetwork, groups: &[Option<usize>], v: usize, r: &mut Vec<usize>) {
        r.clear();
        r.resize(self.num_groups(), 0);
        for &u in net.neighbors(v) {
            if let Some(g) = groups[u] {
                r[g] += 1;
            }
        }
    }

    /// Moves node `v` (currently unallocated in `groups`) into group `h`.
    pub fn add_node(&mut self, net: &SupraNetwork, groups: &[Option<usize>], v: usize, h: usize) {
        let mut r = Vec::new();
        self.node_tallies(net, groups, v, &mut r);
        self.apply(h, &r, true);
    }

    /// Takes node `v` out of group `h`; `groups[v]` must already be `None`.
    pub fn remove_node(&mut self, net: &SupraNetwork, groups: &[Option<usize>], v: usize, h: usize) {
        let mut r = Vec::new();
        self.node_tallies(net, groups, v, &mut r);
        self.apply(h, &r, false);
    }

    /// Adds (or subtracts) the dyads between a node in group `h` and every
    /// allocated node, whose edge tallies are `r`.
    pub(crate) fn apply(&mut self, h: usize, r: &[usize], add: bool) {
        if !add {
            self.sizes[h] -= 1;
        }
        for g in 0..self.num_groups() {
            let e = r[g];
            let ne = self.sizes[g] - e;
            if add {
                self.m[h][g] += e;
                self.mbar[h][g] += ne;
            } else {
                self.m[h][g] -= e;
                self.mbar[h][g] -= ne;
            }
            if g != h {
                self.m[g][h] = self.m[h][g];
                self.mbar[g][h] = self.mbar[h][g];
            }
        }
        if add {
            self.sizes[h] += 1;
        }
    }

    /// Log-likelihood ratio of placing a node with tallies `(r, r̄)` into
    /// group `h` (or a new group when `h == None`), checked.
    pub fn log_likelihood_ratio_for_node(
        &self,
        r: &[usize],
        rbar: &[usize],
        h: Option<usize>,
    ) -> Result<f64, LikelihoodError> {
        let k = self.num_groups();
        for len in [r.len(), rbar.len()] {
            if len != k {
                return Err(LikelihoodError::LengthMismatch { expected: k, got: len });
            }
        }
        for g in 0..k {
            if r[g] + rbar[g] != self.sizes[g] {
                return Err(LikelihoodError::TallyMismatch {
                    group: g,
                    expected: self.sizes[g],
                    got: r[g] + rbar[g],
                });
            }
        }
        if let Some(h) = h {
            if h >= k {
                return Err(LikelihoodError::NoSuchGroup(h));
            }
        }
        Ok(self.ratio_unchecked(r, h))
    }

    #[inline]
    fn ratio_unchecked(&self, r: &[usize], h: Option<usize>) -> f64 {
        let mut out = 0.0;
        match h {
            Some(h) => {
                let (mh, mbh) = (&self.m[h], &self.mbar[h]);
                for g in 0..self.num_groups() {
                    let (e, ne) = (r[g], self.sizes[g] - r[g]);
                    if e + ne > 0 {
                        out += self.ln_beta_at(mh[g] + e, mbh[g] + ne) - self.ln_beta_at(mh[g], mbh[g]);
                    }
                }
            }
            None => {
                let base = self.ln_beta_prior();
                for g in 0..self.num_groups() {
                    let (e, ne) = (r[g], self.sizes[g] - r[g]);
                    if e + ne > 0 {
                        out += self.ln_beta_at(e, ne) - base;
                    }
                }
            }
        }
        out
    }

    /// Ratios for every existing group followed by a new group.
    pub(crate) fn all_ratios(&self, r: &[usize], out: &mut Vec<f64>) {
        out.clear();
        for h in 0..self.num_groups() {
            out.push(self.ratio_unchecked(r, Some(h)));
        }
        out.push(self.ratio_unchecked(r, None));
    }

    /// Posterior-mean edge probability between groups `h` and `g`.
    pub fn edge_probability(&self, h: usize, g: usize) -> f64 {
        let (m, mb) = (self.m[h][g] as f64, self.mbar[h][g] as f64);
        (self.a + m) / (self.a + self.b + m + mb)
    }
}

/// Counts of allocation `z` (labels in `0..H`, every label used).
pub fn induced_counts(
    net: &SupraNetwork,
    z: &[usize],
    a: f64,
    b: f64,
) -> Result<BlockCounts, LikelihoodError> {
    BlockCounts::from_allocation(net, z, a, b)
}

pub fn log_marginal_likelihood(counts: &BlockCounts) -> f64 {
    counts.log_marginal_likelihood()
}

/// Plug-in log-probability of the observed state of dyad `(v, u)` under the
/// counts of `z` (the dyad itself included).
pub fn pointwise_dyad_loglik(
    counts: &BlockCounts,
    net: &SupraNetwork,
    z: &[usize],
    v: usize,
    u: usize,
) -> f64 {
    let p = counts.edge_probability(z[v], z[u]);
    if net.has_edge(v, u) {
        p.ln()
    } else {
        (1.0 - p).ln()
    }
}
