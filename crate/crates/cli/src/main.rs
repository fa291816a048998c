use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pexsbm::check::{run_suite, Suite};
use pexsbm::network::{load_adjacency_matrix, load_network, SupraNetwork};
use pexsbm::pipeline::{
    fit_to_dir, predict_to_dir, read_new_layers, simulate_to_dir, summarize_to_dir, FitOptions,
    KernelChoice, PipelineError, PredictInputs, PriorChoice,
};
use pexsbm::sampler::{Init, ScanOrder};

/// Partially exchangeable SBM for node-colored multilayer networks.
#[derive(Parser)]
#[command(name = "pexsbm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a benchmark network with known groups.
    Simulate {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
        scenario: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated edge-probability matrix replacing the default.
        #[arg(long)]
        psi: Option<PathBuf>,
        #[arg(long, env = "PEXSBM_OUT")]
        out: PathBuf,
    },
    /// Run the Gibbs sampler and store the traces.
    Fit(FitArgs),
    /// Point estimate, credible ball, WAIC and similarity matrix of a fit.
    Summarize {
        #[arg(long)]
        trace: PathBuf,
        /// `node,group` CSV of the true allocation.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, env = "PEXSBM_OUT")]
        out: PathBuf,
    },
    /// Predict groups and edges of new nodes from their layers.
    Predict {
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        input: OptionalInput,
        /// One layer label per line, one line per new node.
        #[arg(long)]
        new_layers: PathBuf,
        /// 0/1 CSV of the new nodes' edges, one row per new node.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "PEXSBM_OUT")]
        out: PathBuf,
    },
    /// Validate closed forms against enumeration oracles.
    Check {
        #[arg(long)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 8)]
        max_n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Eppf,
    Peppf,
    Urns,
    Coclust,
    Elicit,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Eppf => Suite::Eppf,
            SuiteArg::Peppf => Suite::Peppf,
            SuiteArg::Urns => Suite::Urns,
            SuiteArg::Coclust => Suite::Coclust,
            SuiteArg::Elicit => Suite::Elicit,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    Hdp,
    Hnsp,
    HdpHyper,
    Generic,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Singletons,
    OneBlock,
}

#[derive(Args)]
struct Input {
    /// Edge list, two node ids per line.
    #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
    edges: Option<PathBuf>,
    /// Dense 0/1 adjacency matrix, as an alternative to --edges.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Node id and layer label per line (or one label per line with --matrix).
    #[arg(long)]
    layers: PathBuf,
}

#[derive(Args)]
struct OptionalInput {
    #[arg(long, requires = "layers")]
    edges: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    layers: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_enum, default_value = "hdp")]
    prior: PriorArg,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long, default_value_t = 5.0)]
    alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    beta: f64,
    #[arg(long, default_value_t = 12.0)]
    alpha0: f64,
    #[arg(long, default_value_t = 3.0)]
    beta0: f64,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, default_value_t = 10_000)]
    iters: usize,
    #[arg(long, default_value_t = 2_000)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 1)]
    chains: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "singletons")]
    init: InitArg,
    /// Visit nodes in a fresh random order each sweep.
    #[arg(long)]
    random_scan: bool,
    #[arg(long, env = "PEXSBM_OUT")]
    out: PathBuf,
}

impl FitArgs {
    fn prior(&self) -> PriorChoice {
        let theta = self.theta.unwrap_or(0.5);
        let theta0 = self.theta0.unwrap_or(4.0);
        let sigma = self.sigma.unwrap_or(0.2);
        let sigma0 = self.sigma0.unwrap_or(0.8);
        match self.prior {
            PriorArg::Hdp => PriorChoice::Hdp { theta, theta0 },
            PriorArg::Hnsp => PriorChoice::Hnsp { sigma, sigma0 },
            PriorArg::HdpHyper => PriorChoice::HdpHyper {
                alpha: self.alpha,
                beta: self.beta,
                alpha0: self.alpha0,
                beta0: self.beta0,
            },
            PriorArg::Generic => {
                let layer = match self.sigma {
                    Some(s) => KernelChoice::Nsp { sigma: s },
                    None => KernelChoice::Dp { theta },
                };
                let root = match self.sigma0 {
                    Some(s) => KernelChoice::Nsp { sigma: s },
                    None => KernelChoice::Dp { theta: theta0 },
                };
                PriorChoice::Generic { layer, root }
            }
        }
    }

    fn options(&self) -> FitOptions {
        let mut o = FitOptions::new(self.prior());
        o.a = self.a;
        o.b = self.b;
        o.n_iter = self.iters;
        o.n_burn = self.burnin;
        o.thin = self.thin;
        o.chains = self.chains;
        o.seed = self.seed;
        o.init = match self.init {
            InitArg::Singletons => Init::Singletons,
            InitArg::OneBlock => Init::OneBlock,
        };
        o.scan = if self.random_scan { ScanOrder::Random } else { ScanOrder::Ascending };
        o
    }
}

fn load(edges: Option<&Path>, matrix: Option<&Path>, layers: &Path) -> Result<SupraNetwork, PipelineError> {
    let loaded = match (edges, matrix) {
        (Some(e), _) => load_network(e, layers)?,
        (None, Some(m)) => load_adjacency_matrix(m, layers)?,
        (None, None) => return Err(PipelineError::Usage("either --edges or --matrix is required".into())),
    };
    if loaded.duplicate_edges > 0 {
        eprintln!("note: dropped {} repeated edges", loaded.duplicate_edges);
    }
    Ok(loaded.network)
}

fn run(cli: Cli, argv: Vec<String>) -> Result<bool, PipelineError> {
    match cli.command {
        Command::Simulate { scenario, seed, psi, out } => {
            let (net, _) = simulate_to_dir(scenario, seed, psi.as_deref(), &out, argv)?;
            println!(
                "simulated scenario {scenario}: {} nodes, {} edges -> {}",
                net.num_nodes(),
                net.num_edges(),
                out.display()
            );
        }
        Command::Fit(args) => {
            let net = load(args.input.edges.as_deref(), args.input.matrix.as_deref(), &args.input.layers)?;
            let traces = fit_to_dir(&net, &args.options(), &args.out, argv)?;
            for t in &traces {
                println!(
                    "chain {}: {} samples in {:.2}s",
                    t.chain,
                    t.len(),
                    t.wall_time_secs
                );
            }
        }
        Command::Summarize { trace, truth, alpha, out } => {
            let r = summarize_to_dir(&trace, truth.as_deref(), alpha, &out, argv)?;
            println!("H-hat {}  credible radius {}", r.h_hat, r.credible_radius);
            if let Some(w) = &r.waic {
                println!("WAIC {}", w.waic);
            }
            if let Some(vi) = r.vi_to_truth {
                println!("VI to truth {vi}");
            }
        }
        Command::Predict { trace, input, new_layers, config, seed, out } => {
            let network = match (&input.edges, &input.layers) {
                (Some(e), Some(l)) => Some(load(Some(e), None, l)?),
                _ => None,
            };
            let inputs = PredictInputs {
                trace_dir: &trace,
                network,
                new_layers: read_new_layers(&new_layers)?,
                config,
                seed,
            };
            let r = predict_to_dir(inputs, &out, argv)?;
            println!("new-node groups {:?}", r.z_hat_new);
            if let Some(lp) = r.joint_config_logprob {
                println!("configuration log-probability {lp}");
            }
        }
        Command::Check { suite, max_n, seed } => {
            let report = run_suite(suite.into(), max_n, seed);
            println!("{report}");
            return Ok(report.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli, argv) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(PipelineError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
