//! File-level workflow: simulate to disk, fit and store traces, summarize a
//! stored fit, predict from it. Every command leaves a `manifest.json` in
//! its output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eppf::EppfKernel;
use crate::franchise::{FranchiseError, PriorKernels};
use crate::network::{NetworkError, SupraNetwork};
use crate::posterior::{
    expected_vi_to, format_sig, min_vi_estimate, round_sig, similarity_of_traces, vi_distance, waic,
    MinViOptions, PosteriorError,
};
use crate::predict::{
    allocation_estimate, edge_probabilities, joint_config_logprob, predictive_coclustering,
    NewConfiguration, PredictError, PredictionRequest,
};
use crate::sampler::{
    run_chains, GammaHyperprior, Init, Sample, SampleTrace, SamplerConfig, SamplerError, ScanOrder,
};
use crate::simulate::{generate_scenario, read_allocation, read_psi, write_scenario, ScenarioSpec, SimulateError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {msg}")]
    BadFile { path: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Eppf(#[from] crate::eppf::EppfError),
    #[error(transparent)]
    Franchise(#[from] FranchiseError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
}

fn bad_file(path: &Path, msg: impl Into<String>) -> PipelineError {
    PipelineError::BadFile { path: path.display().to_string(), msg: msg.into() }
}

/// One level's EPPF in a serializable form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelChoice {
    Dp { theta: f64 },
    Nsp { sigma: f64 },
}

impl KernelChoice {
    fn kernel(&self) -> Result<EppfKernel, PipelineError> {
        Ok(match *self {
            KernelChoice::Dp { theta } => EppfKernel::dirichlet(theta)?,
            KernelChoice::Nsp { sigma } => EppfKernel::stable(sigma)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "prior", rename_all = "kebab-case")]
pub enum PriorChoice {
    Hdp { theta: f64, theta0: f64 },
    Hnsp { sigma: f64, sigma0: f64 },
    /// H-DP with gamma hyperpriors; the chain starts at the prior means.
    HdpHyper { alpha: f64, beta: f64, alpha0: f64, beta0: f64 },
    /// The given kernels evaluated only through their EPPFs.
    Generic { layer: KernelChoice, root: KernelChoice },
}

impl PriorChoice {
    pub fn kernels(&self) -> Result<PriorKernels, PipelineError> {
        Ok(match *self {
            PriorChoice::Hdp { theta, theta0 } => PriorKernels::hdp(theta, theta0)?,
            PriorChoice::Hnsp { sigma, sigma0 } => PriorKernels::hnsp(sigma, sigma0)?,
            PriorChoice::HdpHyper { .. } => {
                let h = self.hyperprior()?.expect("hyper variant");
                PriorKernels::hdp(h.mean_theta(), h.mean_theta0())?
            }
            PriorChoice::Generic { layer, root } => {
                PriorKernels::new(layer.kernel()?, root.kernel()?).as_generic()
            }
        })
    }

    pub fn hyperprior(&self) -> Result<Option<GammaHyperprior>, PipelineError> {
        match *self {
            PriorChoice::HdpHyper { alpha, beta, alpha0, beta0 } => {
                Ok(Some(GammaHyperprior::new(alpha, beta, alpha0, beta0)?))
            }
            _ => Ok(None),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub prior: PriorChoice,
    pub a: f64,
    pub b: f64,
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
    pub init: Init,
    pub scan: ScanOrder,
}

impl FitOptions {
    pub fn new(prior: PriorChoice) -> Self {
        Self {
            prior,
            a: 1.0,
            b: 1.0,
            n_iter: 10_000,
            n_burn: 2_000,
            thin: 1,
            chains: 1,
            seed: 0,
            init: Init::Singletons,
            scan: ScanOrder::Ascending,
        }
    }

    pub fn sampler_config(&self) -> Result<SamplerConfig, PipelineError> {
        let mut cfg = SamplerConfig::new(self.prior.kernels()?);
        cfg.a = self.a;
        cfg.b = self.b;
        cfg.n_iter = self.n_iter;
        cfg.n_burn = self.n_burn;
        cfg.thin = self.thin;
        cfg.seed = self.seed;
        cfg.init = self.init.clone();
        cfg.scan = self.scan;
        cfg.hyperprior = self.prior.hyperprior()?;
        cfg.check_invariants = false;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitManifest {
    pub command: Vec<String>,
    pub options: FitOptions,
    pub num_nodes: usize,
    pub num_layers: usize,
    pub trace_files: Vec<String>,
    pub wall_time_secs: Vec<f64>,
    pub network_file: String,
}

const NETWORK_JSON: &str = "network.json";
const MANIFEST: &str = "manifest.json";

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| bad_file(path, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| bad_file(path, e.to_string()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulateManifest {
    pub command: Vec<String>,
    pub scenario: u32,
    pub seed: u64,
    pub psi_file: Option<String>,
    pub num_nodes: usize,
    pub num_edges: usize,
}

/// Simulates a benchmark network into `out`.
pub fn simulate_to_dir(
    scenario: u32,
    seed: u64,
    psi: Option<&Path>,
    out: &Path,
    command: Vec<String>,
) -> Result<(SupraNetwork, Vec<usize>), PipelineError> {
    let mut spec = ScenarioSpec::scenario(scenario, seed)?;
    if let Some(p) = psi {
        spec = spec.with_psi(read_psi(p)?)?;
    }
    let (net, z0) = generate_scenario(&spec)?;
    write_scenario(out, &spec, &net)?;
    fs::write(out.join(NETWORK_JSON), net.to_json()?)?;
    let manifest = SimulateManifest {
        command,
        scenario,
        seed,
        psi_file: psi.map(|p| p.display().to_string()),
        num_nodes: net.num_nodes(),
        num_edges: net.num_edges(),
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok((net, z0))
}

fn opt_sig(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

/// One row per retained sweep: sweep, H, log-likelihood, θ, θ₀, the `z`
/// labels and then the `w` labels.
pub fn write_trace_csv(path: &Path, trace: &SampleTrace) -> Result<(), PipelineError> {
    use std::io::Write;
    let v = trace.layer_of.len();
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    let mut header = vec!["sweep".to_string(), "H".into(), "log_lik".into(), "theta".into(), "theta0".into()];
    header.extend((1..=v).map(|i| format!("z_{i}")));
    header.extend((1..=v).map(|i| format!("w_{i}")));
    writeln!(w, "{}", header.join(","))?;
    for s in &trace.samples {
        let mut row = vec![
            s.sweep.to_string(),
            s.num_groups.to_string(),
            format_sig(s.log_lik),
            opt_sig(s.theta),
            opt_sig(s.theta0),
        ];
        row.extend(s.z.iter().map(|x| x.to_string()));
        row.extend(s.w.iter().map(|x| x.to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_trace_csv(path: &Path, num_nodes: usize) -> Result<Vec<Sample>, PipelineError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad_file(path, e.to_string()))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad_file(path, e.to_string()))?;
        if rec.len() != 5 + 2 * num_nodes {
            return Err(bad_file(path, format!("row {} has {} fields", i + 1, rec.len())));
        }
        let int = |k: usize| {
            rec[k].parse::<usize>().map_err(|e| bad_file(path, format!("row {}: {e}", i + 1)))
        };
        let float = |k: usize| -> Result<Option<f64>, PipelineError> {
            if rec[k].is_empty() {
                return Ok(None);
            }
            rec[k].parse::<f64>().map(Some).map_err(|e| bad_file(path, format!("row {}: {e}", i + 1)))
        };
        out.push(Sample {
            sweep: int(0)?,
            num_groups: int(1)?,
            log_lik: float(2)?.unwrap_or(f64::NAN),
            theta: float(3)?,
            theta0: float(4)?,
            z: (5..5 + num_nodes).map(int).collect::<Result<_, _>>()?,
            w: (5 + num_nodes..5 + 2 * num_nodes).map(int).collect::<Result<_, _>>()?,
        });
    }
    Ok(out)
}

pub fn fit(net: &SupraNetwork, opts: &FitOptions) -> Result<Vec<SampleTrace>, PipelineError> {
    if opts.chains == 0 {
        return Err(PipelineError::Usage("at least one chain is required".into()));
    }
    let cfg = opts.sampler_config()?;
    Ok(run_chains(net, &cfg, opts.chains)?)
}

/// Fits and writes `chain_<c>.csv`, `network.json` and the manifest.
pub fn fit_to_dir(
    net: &SupraNetwork,
    opts: &FitOptions,
    out: &Path,
    command: Vec<String>,
) -> Result<Vec<SampleTrace>, PipelineError> {
    let traces = fit(net, opts)?;
    fs::create_dir_all(out)?;
    fs::write(out.join(NETWORK_JSON), net.to_json()?)?;
    let mut files = Vec::new();
    for t in &traces {
        let name = format!("chain_{}.csv", t.chain);
        write_trace_csv(&out.join(&name), t)?;
        files.push(name);
    }
    let manifest = FitManifest {
        command,
        options: opts.clone(),
        num_nodes: net.num_nodes(),
        num_layers: net.num_layers(),
        trace_files: files,
        wall_time_secs: traces.iter().map(|t| round_sig(t.wall_time_secs)).collect(),
        network_file: NETWORK_JSON.into(),
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok(traces)
}

pub struct StoredFit {
    pub net: SupraNetwork,
    pub traces: Vec<SampleTrace>,
    pub manifest: FitManifest,
}

impl StoredFit {
    /// All chains pooled into one trace.
    pub fn pooled(&self) -> SampleTrace {
        let mut pooled = self.traces[0].clone();
        pooled.samples = self.traces.iter().flat_map(|t| t.samples.iter().cloned()).collect();
        pooled
    }
}

pub fn load_fit(dir: &Path) -> Result<StoredFit, PipelineError> {
    let manifest: FitManifest = read_json(&dir.join(MANIFEST))?;
    let net_path = dir.join(&manifest.network_file);
    let net = SupraNetwork::from_json(&fs::read_to_string(&net_path).map_err(|e| bad_file(&net_path, e.to_string()))?)?;
    if net.num_nodes() != manifest.num_nodes {
        return Err(bad_file(&net_path, "node count differs from the manifest"));
    }
    let config = manifest.options.sampler_config()?;
    let mut traces = Vec::new();
    for (c, f) in manifest.trace_files.iter().enumerate() {
        let samples = read_trace_csv(&dir.join(f), net.num_nodes())?;
        traces.push(SampleTrace {
            samples,
            config: config.clone(),
            layer_of: net.layers().to_vec(),
            num_layers: net.num_layers(),
            chain: c,
            wall_time_secs: manifest.wall_time_secs.get(c).copied().unwrap_or(0.0),
        });
    }
    if traces.iter().all(|t| t.is_empty()) {
        return Err(bad_file(&dir.join(MANIFEST), "no retained samples"));
    }
    Ok(StoredFit { net, traces, manifest })
}

#[derive(Clone, Debug, Serialize)]
pub struct WaicReport {
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SummaryReport {
    pub num_samples: usize,
    pub z_hat: Vec<usize>,
    pub h_hat: usize,
    pub credible_level: f64,
    pub credible_radius: f64,
    pub credible_bound: Vec<usize>,
    pub vi_to_bound: f64,
    pub h_median: f64,
    pub h_quartiles: [f64; 2],
    pub expected_vi_bound: f64,
    pub expected_vi: Option<f64>,
    pub waic: Option<WaicReport>,
    pub vi_to_truth: Option<f64>,
    pub expected_vi_to_truth: Option<f64>,
}

/// Summarizes a stored fit; `alpha` is one minus the credible level.
pub fn summarize(
    fit: &StoredFit,
    truth: Option<&[usize]>,
    alpha: f64,
) -> Result<(SummaryReport, crate::posterior::SimilarityMatrix), PipelineError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(PipelineError::Usage(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    let sim = similarity_of_traces(&fit.traces)?;
    let candidates: Vec<Vec<usize>> =
        fit.traces.iter().flat_map(|t| t.samples.iter().map(|s| s.z.clone())).collect();
    let opts = MinViOptions { level: 1.0 - alpha, greedy: true, exact_expected_vi: true };
    let s = min_vi_estimate(&sim, &candidates, &opts)?;
    let w = if candidates.len() >= 2 {
        let cfg = &fit.traces[0].config;
        let w = waic(candidates.iter().map(Vec::as_slice), &fit.net, cfg.a, cfg.b)?;
        Some(WaicReport { waic: round_sig(w.waic), lppd: round_sig(w.lppd), p_waic: round_sig(w.p_waic) })
    } else {
        None
    };
    let (vi_truth, evi_truth) = match truth {
        Some(t) => (
            Some(round_sig(vi_distance(&s.z_hat, t)?)),
            Some(round_sig(expected_vi_to(&candidates, t)?)),
        ),
        None => (None, None),
    };
    let vi_to_bound = round_sig(vi_distance(&s.z_hat, &s.credible_ball.bound)?);
    let report = SummaryReport {
        num_samples: candidates.len(),
        h_hat: s.h_hat,
        credible_level: round_sig(s.credible_ball.level),
        credible_radius: round_sig(s.credible_ball.radius),
        credible_bound: s.credible_ball.bound.clone(),
        vi_to_bound,
        h_median: s.h_median,
        h_quartiles: [s.h_quartiles.0, s.h_quartiles.1],
        expected_vi_bound: round_sig(s.expected_vi_bound),
        expected_vi: s.expected_vi.map(round_sig),
        waic: w,
        vi_to_truth: vi_truth,
        expected_vi_to_truth: evi_truth,
        z_hat: s.z_hat,
    };
    Ok((report, sim))
}

#[derive(Clone, Debug, Serialize)]
pub struct SummarizeManifest {
    pub command: Vec<String>,
    pub trace_dir: String,
    pub truth: Option<String>,
    pub alpha: f64,
    pub outputs: Vec<String>,
}

pub fn summarize_to_dir(
    trace_dir: &Path,
    truth: Option<&Path>,
    alpha: f64,
    out: &Path,
    command: Vec<String>,
) -> Result<SummaryReport, PipelineError> {
    let fit = load_fit(trace_dir)?;
    let truth_z = truth.map(|p| read_allocation(p, &fit.net)).transpose()?;
    let (report, sim) = summarize(&fit, truth_z.as_deref(), alpha)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("summary.json"), &report)?;
    sim.write_csv(&out.join("similarity.csv"))?;
    sim.write_pgm(&out.join("similarity.pgm"), &report.z_hat)?;
    let manifest = SummarizeManifest {
        command,
        trace_dir: trace_dir.display().to_string(),
        truth: truth.map(|p| p.display().to_string()),
        alpha,
        outputs: vec!["summary.json".into(), "similarity.csv".into(), "similarity.pgm".into()],
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok(report)
}

/// One layer label per non-empty line.
pub fn read_new_layers(path: &Path) -> Result<Vec<String>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| bad_file(path, e.to_string()))?;
    let labels: Vec<String> = text
        .lines()
        .map(|l| l.trim().trim_matches('"').to_string())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    if labels.is_empty() {
        return Err(bad_file(path, "no layer labels"));
    }
    Ok(labels)
}

#[derive(Clone, Debug, Serialize)]
pub struct PredictionReport {
    pub new_layers: Vec<String>,
    pub z_hat_new: Vec<usize>,
    pub z_hat: Vec<usize>,
    pub augmented_similarity: String,
    pub edge_probabilities: String,
    pub joint_config_logprob: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PredictManifest {
    pub command: Vec<String>,
    pub trace_dir: String,
    pub seed: u64,
    pub outputs: Vec<String>,
}

pub struct PredictInputs<'a> {
    pub trace_dir: &'a Path,
    /// Network to condition on; defaults to the one stored with the fit.
    pub network: Option<SupraNetwork>,
    pub new_layers: Vec<String>,
    pub config: Option<PathBuf>,
    pub seed: u64,
}

pub fn predict_to_dir(
    inputs: PredictInputs<'_>,
    out: &Path,
    command: Vec<String>,
) -> Result<PredictionReport, PipelineError> {
    let fit = load_fit(inputs.trace_dir)?;
    let net = inputs.network.unwrap_or_else(|| fit.net.clone());
    if net != fit.net {
        return Err(PipelineError::Usage(
            "the given network differs from the one the traces were fitted on".into(),
        ));
    }
    let trace = fit.pooled();
    let request = PredictionRequest::from_labels(&net, &inputs.new_layers, inputs.seed)?;
    let sim = predictive_coclustering(&trace, &net, &request)?;
    let est = allocation_estimate(&trace, &net, &request, &MinViOptions { exact_expected_vi: false, ..Default::default() })?;
    let probs = edge_probabilities(&trace, &net, &request)?;
    let joint = match &inputs.config {
        Some(p) => {
            let cfg = NewConfiguration::from_csv(p, net.num_nodes())?;
            Some(round_sig(joint_config_logprob(&trace, &net, &request, &cfg)?))
        }
        None => None,
    };
    fs::create_dir_all(out)?;
    sim.write_csv(&out.join("augmented_similarity.csv"))?;
    let mut csv_text = String::new();
    for row in &probs {
        csv_text.push_str(&row.iter().map(|x| format_sig(*x)).collect::<Vec<_>>().join(","));
        csv_text.push('\n');
    }
    fs::write(out.join("edge_probabilities.csv"), csv_text)?;
    let v = net.num_nodes();
    let report = PredictionReport {
        new_layers: inputs.new_layers,
        z_hat_new: est.z_hat[v..].to_vec(),
        z_hat: est.z_hat,
        augmented_similarity: "augmented_similarity.csv".into(),
        edge_probabilities: "edge_probabilities.csv".into(),
        joint_config_logprob: joint,
    };
    write_json(&out.join("prediction.json"), &report)?;
    write_json(
        &out.join(MANIFEST),
        &PredictManifest {
            command,
            trace_dir: inputs.trace_dir.display().to_string(),
            seed: inputs.seed,
            outputs: vec![
                "prediction.json".into(),
                "augmented_similarity.csv".into(),
                "edge_probabilities.csv".into(),
            ],
        },
    )?;
    Ok(report)
}
