//! Prediction for `k` unseen nodes of which only the layers are known:
//! predictive co-clustering, sequential allocation draws, per-dyad edge
//! probabilities and the probability of a whole edge configuration.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::franchise::{
    coclustering_probability, fill_log_joint, marginal_urn, FranchiseError, FranchiseState,
    PriorKernels, Seat,
};
use crate::likelihood::{ln_beta, BlockCounts, LikelihoodError};
use crate::log_sum_exp;
use crate::network::SupraNetwork;
use crate::posterior::{min_vi_estimate, MinViOptions, PartitionSummary, PosteriorError, SimilarityMatrix};
use crate::sampler::{sample_log_weights, Sample, SampleTrace};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("unknown layer label `{0}`")]
    UnknownLayer(String),
    #[error("layer index {layer} out of range ({num_layers} layers)")]
    BadLayer { layer: usize, num_layers: usize },
    #[error("no new nodes requested")]
    NoNewNodes,
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("trace was fitted on {trace} nodes but the network has {net}")]
    NetworkMismatch { trace: usize, net: usize },
    #[error("edge configuration is incomplete: {0}")]
    BadConfiguration(String),
    #[error(transparent)]
    Franchise(#[from] FranchiseError),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRequest {
    /// Layer index of each new node, in request order.
    pub new_layers: Vec<usize>,
    pub seed: u64,
    /// Allocation draws per retained sample.
    pub inner_draws: usize,
}

impl PredictionRequest {
    pub fn new(net: &SupraNetwork, new_layers: Vec<usize>, seed: u64) -> Result<Self, PredictError> {
        if new_layers.is_empty() {
            return Err(PredictError::NoNewNodes);
        }
        if let Some(&layer) = new_layers.iter().find(|&&j| j >= net.num_layers()) {
            return Err(PredictError::BadLayer { layer, num_layers: net.num_layers() });
        }
        Ok(Self { new_layers, seed, inner_draws: 1 })
    }

    pub fn from_labels<S: AsRef<str>>(net: &SupraNetwork, labels: &[S], seed: u64) -> Result<Self, PredictError> {
        let layers = labels
            .iter()
            .map(|l| {
                net.layer_index(l.as_ref())
                    .ok_or_else(|| PredictError::UnknownLayer(l.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(net, layers, seed)
    }

    pub fn k(&self) -> usize {
        self.new_layers.len()
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Edges of the new nodes: `rows[i][u]` for new node `i` and node `u` of
/// the augmented index set (in-sample nodes first, then the new ones).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewConfiguration {
    rows: Vec<Vec<bool>>,
}

impl NewConfiguration {
    pub fn new(rows: Vec<Vec<bool>>, num_in_sample: usize) -> Result<Self, PredictError> {
        let k = rows.len();
        let total = num_in_sample + k;
        for (i, r) in rows.iter().enumerate() {
            if r.len() != total {
                return Err(PredictError::BadConfiguration(format!(
                    "row {i} has {} entries, expected {total}",
                    r.len()
                )));
            }
            if r[num_in_sample + i] {
                return Err(PredictError::BadConfiguration(format!("self-loop on new node {i}")));
            }
            for (i2, r2) in rows.iter().enumerate() {
                if r[num_in_sample + i2] != r2[num_in_sample + i] {
                    return Err(PredictError::BadConfiguration(format!(
                        "new nodes {i} and {i2} disagree on their edge"
                    )));
                }
            }
        }
        Ok(Self { rows })
    }

    /// Rows read as 0/1 CSV records.
    pub fn from_csv(path: &std::path::Path, num_in_sample: usize) -> Result<Self, PredictError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(path)
            .map_err(|e| PredictError::BadConfiguration(e.to_string()))?;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| PredictError::BadConfiguration(e.to_string()))?;
            let row = rec
                .iter()
                .map(|x| match x.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(PredictError::BadConfiguration(format!("entry `{other}` is not 0/1"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::new(rows, num_in_sample)
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn edge(&self, i: usize, u: usize) -> bool {
        self.rows[i][u]
    }
}

fn check_trace(trace: &SampleTrace, net: &SupraNetwork) -> Result<(), PredictError> {
    if trace.is_empty() {
        return Err(PredictError::EmptyTrace);
    }
    if trace.layer_of.len() != net.num_nodes() {
        return Err(PredictError::NetworkMismatch { trace: trace.layer_of.len(), net: net.num_nodes() });
    }
    Ok(())
}

/// In-sample state of one sample with the new nodes appended unallocated.
/// Profile slot `h` equals label `h` of the sample's `z`.
pub fn augmented_state(
    sample: &Sample,
    layer_of: &[usize],
    num_layers: usize,
    new_layers: &[usize],
) -> Result<FranchiseState, FranchiseError> {
    let mut state = sample.state(layer_of, num_layers)?;
    state.push_unassigned(new_layers)?;
    Ok(state)
}

/// Seats the unallocated nodes of `state` one at a time, in index order,
/// by the joint urn. Returns the profile slot of each seated node.
pub fn seat_unassigned<R: Rng + ?Sized>(
    state: &mut FranchiseState,
    kernels: &PriorKernels,
    rng: &mut R,
) -> Result<Vec<usize>, PredictError> {
    let (mut ex, mut new, mut weights) = (Vec::new(), Vec::new(), Vec::new());
    let mut out = Vec::new();
    for v in 0..state.num_nodes() {
        if state.is_assigned(v) {
            continue;
        }
        let j = state.layer_of(v);
        fill_log_joint(state, j, kernels, false, &mut ex, &mut new);
        weights.clear();
        weights.extend_from_slice(&ex);
        weights.extend_from_slice(&new);
        let pick = sample_log_weights(&weights, rng);
        let k = ex.len();
        let h_count = state.num_profiles();
        let seat = if pick < k {
            Seat::Existing(pick)
        } else {
            let h = pick - k;
            Seat::NewSubgroup((h < h_count).then_some(h))
        };
        out.push(state.insert_node(v, seat)?);
    }
    Ok(out)
}

/// Draws `(z_new, w_new)` for new nodes of layers `new_layers` given one
/// in-sample allocation. Profile labels extend the sample's `z` labels
/// (fresh profiles get `H, H+1, ...` in order of creation); subgroup
/// labels extend each layer's `w` labels the same way.
pub fn sample_new_allocations<R: Rng + ?Sized>(
    sample: &Sample,
    layer_of: &[usize],
    num_layers: usize,
    kernels: &PriorKernels,
    new_layers: &[usize],
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>), PredictError> {
    let mut state = augmented_state(sample, layer_of, num_layers, new_layers)?;
    let z_new = seat_unassigned(&mut state, kernels, rng)?;
    // subgroup slots of an intact in-sample state equal its canonical w labels
    let first = layer_of.len();
    let w_new = (first..state.num_nodes()).map(|v| state.subgroup_of(v).unwrap()).collect();
    Ok((z_new, w_new))
}

/// `(V+k) × (V+k)` similarity: the in-sample block from the samples, the
/// new rows from urn and co-clustering probabilities averaged over samples.
pub fn predictive_coclustering(
    trace: &SampleTrace,
    net: &SupraNetwork,
    request: &PredictionRequest,
) -> Result<SimilarityMatrix, PredictError> {
    check_trace(trace, net)?;
    let v_count = net.num_nodes();
    let k = request.k();
    let n = v_count + k;
    let d = net.num_layers();
    let mut acc = vec![0.0; n * n];
    for sample in &trace.samples {
        let kernels = sample.kernels(&trace.config.kernels);
        let state = augmented_state(sample, &trace.layer_of, d, &request.new_layers)?;
        let urns: Vec<Vec<f64>> = (0..d).map(|j| marginal_urn(&state, j, &kernels)).collect();
        let mut pair = vec![f64::NAN; d * d];
        for (i, &ji) in request.new_layers.iter().enumerate() {
            let vi = v_count + i;
            for u in 0..v_count {
                acc[vi * n + u] += urns[ji][sample.z[u]];
            }
            for (i2, &ji2) in request.new_layers.iter().enumerate().take(i) {
                let cell = &mut pair[ji * d + ji2];
                if cell.is_nan() {
                    *cell = coclustering_probability(&state, ji, ji2, &kernels);
                }
                acc[vi * n + v_count + i2] += *cell;
            }
        }
        for v in 1..v_count {
            for u in 0..v {
                if sample.z[v] == sample.z[u] {
                    acc[v * n + u] += 1.0;
                }
            }
        }
    }
    let s = trace.len() as f64;
    let mut sim = SimilarityMatrix::identity(n);
    for v in 1..n {
        for u in 0..v {
            sim.set(v, u, (acc[v * n + u] / s).clamp(0.0, 1.0));
        }
    }
    Ok(sim)
}

/// One augmented allocation per retained sample and inner draw: the
/// sample's `z` followed by the drawn `z_new`.
pub fn augmented_draws(
    trace: &SampleTrace,
    net: &SupraNetwork,
    request: &PredictionRequest,
) -> Result<Vec<Vec<usize>>, PredictError> {
    check_trace(trace, net)?;
    let mut rng = request.rng();
    let mut out = Vec::with_capacity(trace.len() * request.inner_draws.max(1));
    for sample in &trace.samples {
        let kernels = sample.kernels(&trace.config.kernels);
        for _ in 0..request.inner_draws.max(1) {
            let (z_new, _) = sample_new_allocations(
                sample,
                &trace.layer_of,
                net.num_layers(),
                &kernels,
                &request.new_layers,
                &mut rng,
            )?;
            let mut z = sample.z.clone();
            z.extend(z_new);
            out.push(z);
        }
    }
    Ok(out)
}

/// minVI point estimate over the augmented node set.
pub fn allocation_estimate(
    trace: &SampleTrace,
    net: &SupraNetwork,
    request: &PredictionRequest,
    opts: &MinViOptions,
) -> Result<PartitionSummary, PredictError> {
    let sim = predictive_coclustering(trace, net, request)?;
    let draws = augmented_draws(trace, net, request)?;
    Ok(min_vi_estimate(&sim, &draws, opts)?)
}

/// `k × (V+k)` matrix of predictive edge probabilities between each new node
/// and every node; the entry of a new node with itself is 0.
pub fn edge_probabilities(
    trace: &SampleTrace,
    net: &SupraNetwork,
    request: &PredictionRequest,
) -> Result<Vec<Vec<f64>>, PredictError> {
    check_trace(trace, net)?;
    let v_count = net.num_nodes();
    let k = request.k();
    let (a, b) = (trace.config.a, trace.config.b);
    let prior = a / (a + b);
    let draws = augmented_draws(trace, net, request)?;
    let per_sample = request.inner_draws.max(1);
    let mut acc = vec![vec![0.0; v_count + k]; k];
    for (s, sample) in trace.samples.iter().enumerate() {
        let counts = BlockCounts::from_allocation(net, &sample.z, a, b)?;
        let h = counts.num_groups();
        for z in &draws[s * per_sample..(s + 1) * per_sample] {
            for i in 0..k {
                let gi = z[v_count + i];
                for u in 0..v_count + k {
                    if u == v_count + i {
                        continue;
                    }
                    let gu = z[u];
                    acc[i][u] += if gi < h && gu < h { counts.edge_probability(gi, gu) } else { prior };
                }
            }
        }
    }
    let total = draws.len() as f64;
    for row in &mut acc {
        for x in row.iter_mut() {
            *x /= total;
        }
    }
    Ok(acc)
}

/// Log of the conditional probability, given one augmented allocation, of
/// the new nodes' edges: a beta-binomial update of every block pair.
pub fn configuration_log_prob(
    counts: &BlockCounts,
    z: &[usize],
    config: &NewConfiguration,
) -> f64 {
    let v_count = z.len() - config.k();
    let groups = z.iter().copied().max().map_or(0, |m| m + 1);
    let mut m_new = vec![0usize; groups * groups];
    let mut mbar_new = vec![0usize; groups * groups];
    let cell = |h: usize, g: usize| if h <= g { h * groups + g } else { g * groups + h };
    for i in 0..config.k() {
        let vi = v_count + i;
        for u in 0..vi {
            let c = cell(z[vi], z[u]);
            if config.edge(i, u) {
                m_new[c] += 1;
            } else {
                mbar_new[c] += 1;
            }
        }
    }
    let (a, b) = (counts.a(), counts.b());
    let h = counts.num_groups();
    let mut out = 0.0;
    for g1 in 0..groups {
        for g2 in g1..groups {
            let c = g1 * groups + g2;
            if m_new[c] + mbar_new[c] == 0 {
                continue;
            }
            let (m, mb) = if g1 < h && g2 < h {
                (counts.m(g1, g2) as f64, counts.mbar(g1, g2) as f64)
            } else {
                (0.0, 0.0)
            };
            out += ln_beta(a + m + m_new[c] as f64, b + mb + mbar_new[c] as f64) - ln_beta(a + m, b + mb);
        }
    }
    out
}

/// Monte Carlo estimate of the log predictive probability of `config`.
pub fn joint_config_logprob(
    trace: &SampleTrace,
    net: &SupraNetwork,
    request: &PredictionRequest,
    config: &NewConfiguration,
) -> Result<f64, PredictError> {
    check_trace(trace, net)?;
    if config.k() != request.k() {
        return Err(PredictError::BadConfiguration(format!(
            "{} rows for {} new nodes",
            config.k(),
            request.k()
        )));
    }
    let (a, b) = (trace.config.a, trace.config.b);
    let draws = augmented_draws(trace, net, request)?;
    let per_sample = request.inner_draws.max(1);
    let mut terms = Vec::with_capacity(draws.len());
    for (s, sample) in trace.samples.iter().enumerate() {
        let counts = BlockCounts::from_allocation(net, &sample.z, a, b)?;
        for z in &draws[s * per_sample..(s + 1) * per_sample] {
            terms.push(configuration_log_prob(&counts, z, config));
        }
    }
    Ok(log_sum_exp(terms.iter().copied()) - (terms.len() as f64).ln())
}

/// Number of new nodes whose estimated group is not dominated by in-sample
/// nodes of their true group. A group with no in-sample node counts as a
/// misallocation for every new node in it.
pub fn misallocation_count(z_hat: &[usize], truth_in: &[usize], truth_new: &[usize]) -> usize {
    let v_count = truth_in.len();
    let groups = z_hat.iter().copied().max().map_or(0, |m| m + 1);
    let labels = truth_in.iter().chain(truth_new).copied().max().map_or(0, |m| m + 1);
    let mut tally = vec![vec![0usize; labels]; groups];
    for (v, &t) in truth_in.iter().enumerate() {
        tally[z_hat[v]][t] += 1;
    }
    let majority: Vec<Option<usize>> = tally
        .iter()
        .map(|row| {
            let (best, &count) = row.iter().enumerate().max_by_key(|(i, c)| (**c, std::cmp::Reverse(*i)))?;
            (count > 0).then_some(best)
        })
        .collect();
    truth_new
        .iter()
        .enumerate()
        .filter(|(i, &t)| majority[z_hat[v_count + i]] != Some(t))
        .count()
}
