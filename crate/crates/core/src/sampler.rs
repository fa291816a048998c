//! Collapsed Gibbs sampler over profiles and subgroups.
//!
//! One sweep visits every node once: the node is taken out, its joint
//! `(profile, subgroup)` conditional is formed as the urn prior times the
//! collapsed likelihood ratio, and it is put back at a draw from that
//! table. With a gamma hyperprior the two H-DP concentrations are then
//! refreshed by auxiliary-variable updates.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eppf::EppfKernel;
use crate::franchise::{fill_log_joint, FranchiseError, FranchiseState, PriorKernels, Seat};
use crate::likelihood::{BlockCounts, LikelihoodError};
use crate::network::SupraNetwork;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("hyperprior updates need Dirichlet kernels at both levels")]
    HyperpriorNeedsDirichlet,
    #[error(transparent)]
    Franchise(#[from] FranchiseError),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
}

/// Independent gamma priors (shape, rate) on the layer concentration `θ`
/// and the root concentration `θ₀`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaHyperprior {
    pub alpha: f64,
    pub beta: f64,
    pub alpha0: f64,
    pub beta0: f64,
}

impl GammaHyperprior {
    pub fn new(alpha: f64, beta: f64, alpha0: f64, beta0: f64) -> Result<Self, SamplerError> {
        if [alpha, beta, alpha0, beta0].iter().all(|x| *x > 0.0 && x.is_finite()) {
            Ok(Self { alpha, beta, alpha0, beta0 })
        } else {
            Err(SamplerError::Config("gamma hyperparameters must be positive".into()))
        }
    }

    pub fn mean_theta(&self) -> f64 {
        self.alpha / self.beta
    }

    pub fn mean_theta0(&self) -> f64 {
        self.alpha0 / self.beta0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Init {
    /// Every node in its own subgroup and profile.
    Singletons,
    /// One profile, one subgroup per layer.
    OneBlock,
    /// Given profile labels, with subgroup labels or one subgroup per
    /// (layer, profile) when `w` is omitted.
    Given { z: Vec<usize>, w: Option<Vec<usize>> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanOrder {
    Ascending,
    Random,
}

/// `Sparse` scores only the non-zero cells of the joint table; `Dense`
/// walks the whole `(H+1) × (ℓ_j·+1)` grid. Both draw identically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableMode {
    Sparse,
    Dense,
}

#[derive(Clone, Debug)]
pub struct SamplerConfig {
    pub kernels: PriorKernels,
    pub a: f64,
    pub b: f64,
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
    pub seed: u64,
    pub init: Init,
    pub hyperprior: Option<GammaHyperprior>,
    pub scan: ScanOrder,
    pub table: TableMode,
    /// When false the likelihood factor is dropped and the chain samples
    /// the prior.
    pub use_likelihood: bool,
    /// Recount the franchise tallies after every move.
    pub check_invariants: bool,
}

impl SamplerConfig {
    pub fn new(kernels: PriorKernels) -> Self {
        Self {
            kernels,
            a: 1.0,
            b: 1.0,
            n_iter: 10_000,
            n_burn: 2_000,
            thin: 1,
            seed: 0,
            init: Init::Singletons,
            hyperprior: None,
            scan: ScanOrder::Ascending,
            table: TableMode::Sparse,
            use_likelihood: true,
            check_invariants: cfg!(debug_assertions),
        }
    }

    pub fn iterations(mut self, n_iter: usize, n_burn: usize) -> Self {
        self.n_iter = n_iter;
        self.n_burn = n_burn;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.n_burn >= self.n_iter {
            return Err(SamplerError::Config(format!(
                "burn-in ({}) must be smaller than the number of sweeps ({})",
                self.n_burn, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(SamplerError::Config("thin must be at least 1".into()));
        }
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(SamplerError::Likelihood(LikelihoodError::BadHyper(self.a, self.b)));
        }
        if self.hyperprior.is_some() && dirichlet_params(&self.kernels).is_none() {
            return Err(SamplerError::HyperpriorNeedsDirichlet);
        }
        Ok(())
    }

    /// Number of retained samples.
    pub fn trace_len(&self) -> usize {
        (self.n_iter - self.n_burn) / self.thin
    }

    pub fn is_retained(&self, sweep: usize) -> bool {
        sweep > self.n_burn && (sweep - self.n_burn).is_multiple_of(self.thin)
    }
}

fn dirichlet_params(k: &PriorKernels) -> Option<(f64, f64)> {
    match (&k.layer, &k.root) {
        (EppfKernel::Dirichlet { theta }, EppfKernel::Dirichlet { theta: theta0 }) => {
            Some((*theta, *theta0))
        }
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub sweep: usize,
    /// Profile labels in order of appearance.
    pub z: Vec<usize>,
    /// Within-layer subgroup labels in order of appearance.
    pub w: Vec<usize>,
    pub num_groups: usize,
    /// Collapsed log-likelihood of `z`.
    pub log_lik: f64,
    pub theta: Option<f64>,
    pub theta0: Option<f64>,
}

impl Sample {
    /// Prior kernels in force at this sample: the hyperprior draws when
    /// present, otherwise `base`.
    pub fn kernels(&self, base: &PriorKernels) -> PriorKernels {
        match (self.theta, self.theta0) {
            (Some(t), Some(t0)) => PriorKernels::hdp(t, t0).unwrap_or_else(|_| base.clone()),
            _ => base.clone(),
        }
    }

    /// Franchise state rebuilt from the stored labels.
    pub fn state(&self, layer_of: &[usize], num_layers: usize) -> Result<FranchiseState, FranchiseError> {
        FranchiseState::from_assignment(layer_of.to_vec(), num_layers, &self.z, &self.w)
    }
}

#[derive(Clone, Debug)]
pub struct SampleTrace {
    pub samples: Vec<Sample>,
    pub config: SamplerConfig,
    pub layer_of: Vec<usize>,
    pub num_layers: usize,
    pub chain: usize,
    pub wall_time_secs: f64,
}

impl SampleTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn partitions(&self) -> impl Iterator<Item = &[usize]> {
        self.samples.iter().map(|s| s.z.as_slice())
    }
}

/// Draws `(θ', θ₀')` given the franchise counts, for H-DP kernels.
pub fn hyperprior_step<R: Rng + ?Sized>(
    state: &FranchiseState,
    kernels: &PriorKernels,
    hyper: &GammaHyperprior,
    rng: &mut R,
) -> Result<(f64, f64), SamplerError> {
    let (theta, theta0) = dirichlet_params(kernels).ok_or(SamplerError::HyperpriorNeedsDirichlet)?;
    let l = state.total_subgroups() as f64;
    let h = state.num_profiles() as f64;
    let beta = |x: f64, y: f64| Beta::new(x, y).map_err(|e| SamplerError::Config(e.to_string()));
    let nu0 = if l > 0.0 { beta(theta0, l)?.sample(rng).ln() } else { 0.0 };
    let mut nu = 0.0;
    for j in 0..state.num_layers() {
        let vj = state.layer_occupancy(j) as f64;
        if vj > 0.0 {
            nu += beta(theta, vj)?.sample(rng).ln();
        }
    }
    let gamma = |shape: f64, rate: f64| {
        Gamma::new(shape, 1.0 / rate).map_err(|e| SamplerError::Config(e.to_string()))
    };
    let theta0_new = gamma(hyper.alpha0 + h, hyper.beta0 - nu0)?.sample(rng);
    let theta_new = gamma(hyper.alpha + l, hyper.beta - nu)?.sample(rng);
    // Guard against underflow to exactly zero, which no kernel accepts.
    Ok((theta_new.max(f64::MIN_POSITIVE), theta0_new.max(f64::MIN_POSITIVE)))
}

/// Single-site Gibbs moves over one franchise state and its block counts.
pub struct GibbsState<'a> {
    net: &'a SupraNetwork,
    pub state: FranchiseState,
    pub counts: BlockCounts,
    kernels: PriorKernels,
    use_likelihood: bool,
    table: TableMode,
    check: bool,
    r: Vec<usize>,
    lik: Vec<f64>,
    ex: Vec<f64>,
    new: Vec<f64>,
    weights: Vec<f64>,
}

impl<'a> GibbsState<'a> {
    pub fn new(net: &'a SupraNetwork, cfg: &SamplerConfig) -> Result<Self, SamplerError> {
        let layer_of = net.layers().to_vec();
        let d = net.num_layers();
        let state = match &cfg.init {
            Init::Singletons => FranchiseState::singletons(layer_of, d)?,
            Init::OneBlock => FranchiseState::one_block(layer_of, d)?,
            Init::Given { z, w } => {
                let w = match w {
                    Some(w) => w.clone(),
                    None => z.clone(),
                };
                FranchiseState::from_assignment(layer_of, d, z, &w)?
            }
        };
        let slots: Vec<usize> = (0..net.num_nodes())
            .map(|v| state.profile_of(v).expect("initial states allocate every node"))
            .collect();
        let counts = BlockCounts::from_allocation(net, &slots, cfg.a, cfg.b)?;
        Ok(Self {
            net,
            state,
            counts,
            kernels: cfg.kernels.clone(),
            use_likelihood: cfg.use_likelihood,
            table: cfg.table,
            check: cfg.check_invariants,
            r: Vec::new(),
            lik: Vec::new(),
            ex: Vec::new(),
            new: Vec::new(),
            weights: Vec::new(),
        })
    }

    pub fn kernels(&self) -> &PriorKernels {
        &self.kernels
    }

    pub fn set_kernels(&mut self, kernels: PriorKernels) {
        self.kernels = kernels;
    }

    fn profile_slots(&self) -> Vec<Option<usize>> {
        (0..self.state.num_nodes()).map(|v| self.state.profile_of(v)).collect()
    }

    /// Resamples the profile and subgroup of node `v`.
    pub fn update_node<R: Rng + ?Sized>(&mut self, v: usize, rng: &mut R) -> Result<(), SamplerError> {
        let j = self.state.layer_of(v);
        let g = self.state.profile_of(v).ok_or(FranchiseError::NotAssigned(v))?;

        // Edge tallies from v to every group, then take v out of both structures.
        self.r.clear();
        self.r.resize(self.counts.num_groups(), 0);
        for &u in self.net.neighbors(v) {
            if let Some(h) = self.state.profile_of(u) {
                self.r[h] += 1;
            }
        }
        self.counts.apply(g, &self.r, false);
        let record = self.state.remove_node(v)?;
        if record.profile_deleted() {
            self.counts.swap_remove_group(g)?;
            self.r.swap_remove(g);
        }

        let h_count = self.state.num_profiles();
        if self.use_likelihood {
            self.counts.all_ratios(&self.r, &mut self.lik);
        } else {
            self.lik.clear();
            self.lik.resize(h_count + 1, 0.0);
        }
        fill_log_joint(&self.state, j, &self.kernels, false, &mut self.ex, &mut self.new);

        let subgroups = self.state.subgroups(j);
        self.weights.clear();
        match self.table {
            TableMode::Sparse => {
                for (t, sg) in subgroups.iter().enumerate() {
                    self.weights.push(self.ex[t] + self.lik[sg.profile]);
                }
            }
            TableMode::Dense => {
                // column-major over the full grid; zero cells get -inf
                for (t, sg) in subgroups.iter().enumerate() {
                    for h in 0..=h_count {
                        self.weights.push(if h == sg.profile {
                            self.ex[t] + self.lik[h]
                        } else {
                            f64::NEG_INFINITY
                        });
                    }
                }
            }
        }
        for h in 0..=h_count {
            self.weights.push(self.new[h] + self.lik[h]);
        }
        let pick = sample_log_weights(&self.weights, rng);
        let k = subgroups.len();
        let seat = match self.table {
            TableMode::Sparse if pick < k => Seat::Existing(pick),
            TableMode::Dense if pick < k * (h_count + 1) => Seat::Existing(pick / (h_count + 1)),
            TableMode::Sparse => new_seat(pick - k, h_count),
            TableMode::Dense => new_seat(pick - k * (h_count + 1), h_count),
        };

        let h = self.state.insert_node(v, seat)?;
        if h == self.counts.num_groups() {
            self.counts.push_group();
            self.r.push(0);
        }
        self.counts.apply(h, &self.r, true);
        if self.check {
            self.state
                .check_invariants()
                .map_err(|e| SamplerError::Config(format!("franchise invariant broken: {e}")))?;
        }
        Ok(())
    }

    pub fn sweep<R: Rng + ?Sized>(&mut self, order: &[usize], rng: &mut R) -> Result<(), SamplerError> {
        for &v in order {
            self.update_node(v, rng)?;
        }
        Ok(())
    }

    /// Canonical snapshot of the current allocation.
    pub fn snapshot(&self, sweep: usize) -> Sample {
        let (theta, theta0) = match dirichlet_params(&self.kernels) {
            Some((t, t0)) => (Some(t), Some(t0)),
            None => (None, None),
        };
        Sample {
            sweep,
            z: self.state.canonical_z(),
            w: self.state.canonical_w(),
            num_groups: self.state.num_profiles(),
            log_lik: self.counts.log_marginal_likelihood(),
            theta,
            theta0,
        }
    }

    /// Recounts the block tallies from scratch and compares.
    pub fn counts_match_recount(&self) -> bool {
        let slots: Vec<usize> = self.profile_slots().into_iter().map(|s| s.unwrap()).collect();
        BlockCounts::from_allocation(self.net, &slots, self.counts.a(), self.counts.b())
            .map(|c| c == self.counts)
            .unwrap_or(false)
    }
}

fn new_seat(h: usize, h_count: usize) -> Seat {
    Seat::NewSubgroup((h < h_count).then_some(h))
}

/// Index drawn with probability proportional to `exp(w[i])`.
pub fn sample_log_weights<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = w.iter().map(|x| (x - m).exp()).sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, x) in w.iter().enumerate() {
        let p = (x - m).exp();
        if p > 0.0 {
            acc += p;
            last = i;
            if target < acc {
                return i;
            }
        }
    }
    last
}

/// Generator for chain `chain` of a run seeded with `seed`: every chain gets
/// its own ChaCha stream of the same key.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

pub fn run_chain(net: &SupraNetwork, cfg: &SamplerConfig) -> Result<SampleTrace, SamplerError> {
    run_chain_indexed(net, cfg, 0)
}

pub fn run_chain_indexed(
    net: &SupraNetwork,
    cfg: &SamplerConfig,
    chain: usize,
) -> Result<SampleTrace, SamplerError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rng = chain_rng(cfg.seed, chain);
    let mut gibbs = GibbsState::new(net, cfg)?;
    let mut order: Vec<usize> = (0..net.num_nodes()).collect();
    let mut samples = Vec::with_capacity(cfg.trace_len());
    for sweep in 1..=cfg.n_iter {
        if cfg.scan == ScanOrder::Random {
            order.shuffle(&mut rng);
        }
        gibbs.sweep(&order, &mut rng)?;
        if let Some(hyper) = &cfg.hyperprior {
            let (t, t0) = hyperprior_step(&gibbs.state, gibbs.kernels(), hyper, &mut rng)?;
            gibbs.set_kernels(PriorKernels::hdp(t, t0).map_err(FranchiseError::from)?);
        }
        if cfg.is_retained(sweep) {
            samples.push(gibbs.snapshot(sweep));
        }
    }
    Ok(SampleTrace {
        samples,
        config: cfg.clone(),
        layer_of: net.layers().to_vec(),
        num_layers: net.num_layers(),
        chain,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Runs `chains` independent chains on separate threads.
pub fn run_chains(
    net: &SupraNetwork,
    cfg: &SamplerConfig,
    chains: usize,
) -> Result<Vec<SampleTrace>, SamplerError> {
    cfg.validate()?;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..chains)
            .map(|c| s.spawn(move || run_chain_indexed(net, cfg, c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampler thread panicked"))
            .collect()
    })
}
