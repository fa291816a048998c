//! Posterior summaries of a partition trace: similarity matrix,
//! variation of information, the minVI point estimate with its credible
//! ball, and WAIC.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::eppf::EppfKernel;
use crate::franchise::canonical_labels;
use crate::likelihood::{BlockCounts, LikelihoodError};
use crate::network::SupraNetwork;
use crate::sampler::SampleTrace;

#[derive(Debug, Error)]
pub enum PosteriorError {
    #[error("no samples to summarize")]
    Empty,
    #[error("WAIC needs at least two samples")]
    TooFewSamples,
    #[error("partition length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("credible level must lie in (0, 1], got {0}")]
    BadLevel(f64),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Co-clustering frequencies, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds a matrix from square rows; symmetry is not checked.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        Self { n, data: rows.into_iter().flatten().collect() }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, v: usize, u: usize) -> f64 {
        self.data[v * self.n + u]
    }

    pub(crate) fn set(&mut self, v: usize, u: usize, x: f64) {
        self.data[v * self.n + u] = x;
        self.data[u * self.n + v] = x;
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.data[v * self.n..(v + 1) * self.n]
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for v in 0..n {
            data[v * n + v] = 1.0;
        }
        Self { n, data }
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), PosteriorError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for v in 0..self.n {
            let line: Vec<String> = self.row(v).iter().map(|x| format_sig(*x)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Plain grayscale PGM with rows and columns sorted by `order` labels;
    /// black is similarity 1.
    pub fn write_pgm(&self, path: &Path, order: &[usize]) -> Result<(), PosteriorError> {
        let mut idx: Vec<usize> = (0..self.n).collect();
        if order.len() == self.n {
            idx.sort_by_key(|&v| (order[v], v));
        }
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "P2\n{} {}\n255", self.n, self.n)?;
        for &v in &idx {
            let line: Vec<String> = idx
                .iter()
                .map(|&u| (255.0 * (1.0 - self.get(v, u))).round().clamp(0.0, 255.0).to_string())
                .collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Decimal rendering with 12 significant digits.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..15).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

/// Rounds to 12 significant digits, for JSON reports.
pub fn round_sig(x: f64) -> f64 {
    format_sig(x).parse().unwrap_or(x)
}

/// Incremental co-clustering counts.
#[derive(Clone, Debug)]
pub struct SimilarityAccumulator {
    n: usize,
    counts: Vec<u64>,
    samples: u64,
}

impl SimilarityAccumulator {
    pub fn new(n: usize) -> Self {
        Self { n, counts: vec![0; n * (n.saturating_sub(1)) / 2], samples: 0 }
    }

    pub fn add(&mut self, z: &[usize]) -> Result<(), PosteriorError> {
        if z.len() != self.n {
            return Err(PosteriorError::LengthMismatch { expected: self.n, got: z.len() });
        }
        let mut k = 0;
        for v in 1..self.n {
            for u in 0..v {
                self.counts[k] += (z[v] == z[u]) as u64;
                k += 1;
            }
        }
        self.samples += 1;
        Ok(())
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn finish(&self) -> Result<SimilarityMatrix, PosteriorError> {
        if self.samples == 0 {
            return Err(PosteriorError::Empty);
        }
        let mut m = SimilarityMatrix::identity(self.n);
        let s = self.samples as f64;
        let mut k = 0;
        for v in 1..self.n {
            for u in 0..v {
                m.set(v, u, self.counts[k] as f64 / s);
                k += 1;
            }
        }
        Ok(m)
    }
}

pub fn similarity<'a>(
    partitions: impl IntoIterator<Item = &'a [usize]>,
) -> Result<SimilarityMatrix, PosteriorError> {
    let mut it = partitions.into_iter().peekable();
    let n = it.peek().ok_or(PosteriorError::Empty)?.len();
    let mut acc = SimilarityAccumulator::new(n);
    for z in it {
        acc.add(z)?;
    }
    acc.finish()
}

/// Similarity over the pooled samples of several chains.
pub fn similarity_of_traces(traces: &[SampleTrace]) -> Result<SimilarityMatrix, PosteriorError> {
    similarity(traces.iter().flat_map(|t| t.partitions()))
}

/// Entropy of the cell counts, summed in sorted order so the value does not
/// depend on labels.
fn entropy_terms(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    let mut counts: Vec<usize> = counts.filter(|&c| c > 0).collect();
    counts.sort_unstable();
    counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Variation of information in bits.
pub fn vi_distance(a: &[usize], b: &[usize]) -> Result<f64, PosteriorError> {
    if a.len() != b.len() {
        return Err(PosteriorError::LengthMismatch { expected: a.len(), got: b.len() });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let n = a.len() as f64;
    let mut ca: HashMap<usize, usize> = HashMap::new();
    let mut cb: HashMap<usize, usize> = HashMap::new();
    let mut cab: HashMap<(usize, usize), usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
        *cab.entry((x, y)).or_default() += 1;
    }
    let ha = entropy_terms(ca.values().copied(), n);
    let hb = entropy_terms(cb.values().copied(), n);
    let hab = entropy_terms(cab.values().copied(), n);
    // VI = 2 H(A,B) - H(A) - H(B)
    Ok((2.0 * hab - ha - hb).max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CredibleBall {
    pub radius: f64,
    /// Horizontal bound: a covered sample at maximal distance from `ẑ`.
    pub bound: Vec<usize>,
    pub level: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionSummary {
    pub z_hat: Vec<usize>,
    pub h_hat: usize,
    pub credible_ball: CredibleBall,
    pub h_median: f64,
    pub h_quartiles: (f64, f64),
    /// Value of the minimized expected-VI surrogate at `ẑ`.
    pub expected_vi_bound: f64,
    /// Exact posterior mean of `VI(ẑ, z)` over the samples, when requested.
    pub expected_vi: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinViOptions {
    /// Coverage of the credible ball.
    pub level: f64,
    pub greedy: bool,
    /// Also compute the exact expected VI of `ẑ` against all samples.
    pub exact_expected_vi: bool,
}

impl Default for MinViOptions {
    fn default() -> Self {
        Self { level: 0.95, greedy: true, exact_expected_vi: true }
    }
}

/// Lower bound of the posterior expected VI of `z`, from the similarity.
pub fn expected_vi_bound(sim: &SimilarityMatrix, z: &[usize]) -> f64 {
    let n = z.len();
    let mut total = 0.0;
    for v in 0..n {
        let row = sim.row(v);
        let (mut size, mut within, mut mass) = (0.0f64, 0.0f64, 0.0f64);
        for u in 0..n {
            mass += row[u];
            if z[u] == z[v] {
                size += 1.0;
                within += row[u];
            }
        }
        total += size.log2() - 2.0 * within.log2() + mass.log2();
    }
    total / n as f64
}

/// Single-node moves that lower the surrogate until none does.
fn greedy_refine(sim: &SimilarityMatrix, z: &mut Vec<usize>) {
    let n = z.len();
    if n < 2 {
        return;
    }
    // cluster sizes s[k] and t[v] = sum of similarities to v's cluster
    let mut k_count = z.iter().copied().max().unwrap_or(0) + 1;
    let mut size = vec![0usize; k_count];
    for &k in z.iter() {
        size[k] += 1;
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k_count];
    for (v, &k) in z.iter().enumerate() {
        members[k].push(v);
    }
    let mut t: Vec<f64> = (0..n)
        .map(|v| members[z[v]].iter().map(|&u| sim.get(v, u)).sum())
        .collect();

    let term = |s: f64, t: f64| s.log2() - 2.0 * t.log2();
    let max_passes = 100;
    for _ in 0..max_passes {
        let mut moved = false;
        for x in 0..n {
            let a = z[x];
            // cost change of removing x from a
            let mut leave = -term(size[a] as f64, t[x]);
            for &v in &members[a] {
                if v != x {
                    let c = sim.get(v, x);
                    leave += term(size[a] as f64 - 1.0, t[v] - c) - term(size[a] as f64, t[v]);
                }
            }
            let mut best = (0.0, a);
            for b in 0..=k_count {
                if b == a || (b < k_count && size[b] == 0) {
                    continue;
                }
                let (sb, tx) = if b < k_count {
                    (size[b], members[b].iter().map(|&u| sim.get(x, u)).sum::<f64>() + 1.0)
                } else {
                    (0, 1.0)
                };
                let mut join = term(sb as f64 + 1.0, tx);
                if b < k_count {
                    for &v in &members[b] {
                        let c = sim.get(v, x);
                        join += term(sb as f64 + 1.0, t[v] + c) - term(sb as f64, t[v]);
                    }
                }
                let delta = leave + join;
                if delta < best.0 - 1e-12 {
                    best = (delta, b);
                }
            }
            let b = best.1;
            if b == a {
                continue;
            }
            if b == k_count {
                k_count += 1;
                size.push(0);
                members.push(Vec::new());
            }
            members[a].retain(|&v| v != x);
            for &v in &members[a] {
                t[v] -= sim.get(v, x);
            }
            for &v in &members[b] {
                t[v] += sim.get(v, x);
            }
            t[x] = members[b].iter().map(|&u| sim.get(x, u)).sum::<f64>() + 1.0;
            members[b].push(x);
            size[a] -= 1;
            size[b] += 1;
            z[x] = b;
            moved = true;
        }
        if !moved {
            break;
        }
    }
    *z = canonical_labels(z.iter().copied());
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn min_vi_estimate(
    sim: &SimilarityMatrix,
    candidates: &[Vec<usize>],
    opts: &MinViOptions,
) -> Result<PartitionSummary, PosteriorError> {
    if candidates.is_empty() {
        return Err(PosteriorError::Empty);
    }
    if !(opts.level > 0.0 && opts.level <= 1.0) {
        return Err(PosteriorError::BadLevel(opts.level));
    }
    for c in candidates {
        if c.len() != sim.len() {
            return Err(PosteriorError::LengthMismatch { expected: sim.len(), got: c.len() });
        }
    }
    let canon: Vec<Vec<usize>> = candidates.iter().map(|c| canonical_labels(c.iter().copied())).collect();
    let mut seen = std::collections::HashSet::new();
    let mut best: Option<(f64, &Vec<usize>)> = None;
    for c in &canon {
        if !seen.insert(c) {
            continue;
        }
        let val = expected_vi_bound(sim, c);
        if best.is_none_or(|(b, _)| val < b) {
            best = Some((val, c));
        }
    }
    let (mut best_val, best_z) = best.expect("non-empty candidate set");
    let mut z_hat = best_z.clone();
    if opts.greedy {
        let mut refined = z_hat.clone();
        greedy_refine(sim, &mut refined);
        let val = expected_vi_bound(sim, &refined);
        if val < best_val - 1e-12 {
            best_val = val;
            z_hat = refined;
        }
    }

    let dists: Vec<f64> = canon.iter().map(|c| vi_distance(&z_hat, c)).collect::<Result<_, _>>()?;
    let mut sorted = dists.clone();
    sorted.sort_by(f64::total_cmp);
    let need = ((opts.level * canon.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    let radius = sorted[need - 1];
    let bound_idx = dists
        .iter()
        .enumerate()
        .filter(|(_, d)| **d <= radius)
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);

    let mut hs: Vec<f64> = canon
        .iter()
        .map(|c| (c.iter().copied().max().map_or(0, |m| m + 1)) as f64)
        .collect();
    hs.sort_by(f64::total_cmp);
    let expected_vi = opts
        .exact_expected_vi
        .then(|| dists.iter().sum::<f64>() / dists.len() as f64);

    Ok(PartitionSummary {
        h_hat: z_hat.iter().copied().max().map_or(0, |m| m + 1),
        z_hat,
        credible_ball: CredibleBall { radius, bound: canon[bound_idx].clone(), level: opts.level },
        h_median: quantile(&hs, 0.5),
        h_quartiles: (quantile(&hs, 0.25), quantile(&hs, 0.75)),
        expected_vi_bound: best_val,
        expected_vi,
    })
}

/// Posterior mean of `VI(z, reference)` over the samples.
pub fn expected_vi_to(candidates: &[Vec<usize>], reference: &[usize]) -> Result<f64, PosteriorError> {
    if candidates.is_empty() {
        return Err(PosteriorError::Empty);
    }
    let mut total = 0.0;
    for c in candidates {
        total += vi_distance(c, reference)?;
    }
    Ok(total / candidates.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Waic {
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
}

/// WAIC over dyads `u < v`. Each sample scores dyad `(v, u)` with the
/// conjugate plug-in `(a+m)/(a+b+m+m̄)` of its block pair.
pub fn waic<'a>(
    partitions: impl IntoIterator<Item = &'a [usize]>,
    net: &SupraNetwork,
    a: f64,
    b: f64,
) -> Result<Waic, PosteriorError> {
    let n = net.num_nodes();
    let dyads = net.num_dyads();
    let mut mean_p = vec![0.0; dyads];
    let mut mean_l = vec![0.0; dyads];
    let mut m2_l = vec![0.0; dyads];
    let mut s = 0usize;
    for z in partitions {
        if z.len() != n {
            return Err(PosteriorError::LengthMismatch { expected: n, got: z.len() });
        }
        let counts = BlockCounts::from_allocation(net, z, a, b)?;
        let k = counts.num_groups();
        let mut lp1 = vec![0.0; k * k];
        let mut lp0 = vec![0.0; k * k];
        for h in 0..k {
            for g in 0..k {
                let p = counts.edge_probability(h, g);
                lp1[h * k + g] = p.ln();
                lp0[h * k + g] = (1.0 - p).ln();
            }
        }
        s += 1;
        let sf = s as f64;
        let mut d = 0;
        for v in 1..n {
            for u in 0..v {
                let cell = z[v] * k + z[u];
                let l = if net.has_edge(v, u) { lp1[cell] } else { lp0[cell] };
                mean_p[d] += (l.exp() - mean_p[d]) / sf;
                let delta = l - mean_l[d];
                mean_l[d] += delta / sf;
                m2_l[d] += delta * (l - mean_l[d]);
                d += 1;
            }
        }
    }
    if s == 0 {
        return Err(PosteriorError::Empty);
    }
    if s < 2 {
        return Err(PosteriorError::TooFewSamples);
    }
    let lppd: f64 = mean_p.iter().map(|p| p.ln()).sum();
    // population variance of the pointwise log-likelihood
    let p_waic: f64 = m2_l.iter().map(|m| m / s as f64).sum();
    Ok(Waic { waic: -2.0 * (lppd - p_waic), lppd, p_waic })
}

pub fn waic_of_trace(trace: &SampleTrace, net: &SupraNetwork) -> Result<Waic, PosteriorError> {
    waic(trace.partitions(), net, trace.config.a, trace.config.b)
}

/// Short label of a prior for reports.
pub fn kernel_label(k: &EppfKernel) -> String {
    match k {
        EppfKernel::Dirichlet { theta } => format!("DP({})", format_sig(*theta)),
        EppfKernel::Stable { sigma } => format!("NSP({})", format_sig(*sigma)),
        EppfKernel::Generic(g) => format!("generic({})", g.name()),
    }
}
