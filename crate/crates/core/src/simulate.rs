//! Synthetic networks: the pyramidal two-scenario benchmark, generic SBM
//! draws from a known allocation, and prior draws of partitions.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::franchise::{FranchiseError, FranchiseState, PriorKernels};
use crate::network::{NetworkError, SupraNetwork};
use crate::predict::{seat_unassigned, PredictError};

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("unknown scenario {0}; expected 1 or 2")]
    UnknownScenario(u32),
    #[error("invalid edge-probability matrix: {0}")]
    BadPsi(String),
    #[error("allocation does not match the layer sizes: {0}")]
    BadAllocation(String),
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Franchise(#[from] FranchiseError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Group sizes per layer of the benchmark: in layers 1 to 3 a large
/// affiliate group and a small supervisor group, plus a boss group spanning
/// those three layers; layer 4 holds only the top bosses.
pub const SCENARIO_LAYER_SIZES: [usize; 4] = [30, 30, 15, 5];

const AFFILIATES: [usize; 3] = [0, 3, 5];
const SUPERVISORS: [usize; 3] = [1, 4, 6];
const BOSSES: usize = 2;
const TOP: usize = 7;

fn scenario_z0() -> Vec<usize> {
    let mut z = Vec::with_capacity(80);
    let blocks: [&[(usize, usize)]; 4] = [
        &[(AFFILIATES[0], 20), (SUPERVISORS[0], 6), (BOSSES, 4)],
        &[(AFFILIATES[1], 20), (SUPERVISORS[1], 6), (BOSSES, 4)],
        &[(AFFILIATES[2], 8), (SUPERVISORS[2], 4), (BOSSES, 3)],
        &[(TOP, 5)],
    ];
    for layer in blocks {
        for &(g, n) in layer {
            z.extend(std::iter::repeat_n(g, n));
        }
    }
    z
}

fn scenario1_psi() -> Vec<Vec<f64>> {
    let mut psi = vec![vec![0.05; 8]; 8];
    let mut set = |a: usize, b: usize, p: f64| {
        psi[a][b] = p;
        psi[b][a] = p;
    };
    for g in 0..8 {
        set(g, g, 0.75);
    }
    for l in 0..3 {
        set(AFFILIATES[l], SUPERVISORS[l], 0.4);
        set(SUPERVISORS[l], BOSSES, 0.6);
    }
    set(BOSSES, TOP, 0.6);
    psi
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub layer_sizes: Vec<usize>,
    pub z0: Vec<usize>,
    pub psi: Vec<Vec<f64>>,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        z0: Vec<usize>,
        psi: Vec<Vec<f64>>,
        seed: u64,
    ) -> Result<Self, SimulateError> {
        let spec = Self { layer_sizes, z0, psi, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// Benchmark scenario 1 (well separated blocks) or 2 (blurred blocks).
    pub fn scenario(which: u32, seed: u64) -> Result<Self, SimulateError> {
        let psi = match which {
            1 => scenario1_psi(),
            2 => scenario1_psi()
                .into_iter()
                .map(|row| row.into_iter().map(|p| 0.35 + 0.15 * (p - 0.4) / 0.35).collect())
                .collect(),
            other => return Err(SimulateError::UnknownScenario(other)),
        };
        Self::new(SCENARIO_LAYER_SIZES.to_vec(), scenario_z0(), psi, seed)
    }

    pub fn with_psi(mut self, psi: Vec<Vec<f64>>) -> Result<Self, SimulateError> {
        self.psi = psi;
        self.validate()?;
        Ok(self)
    }

    pub fn num_groups(&self) -> usize {
        self.psi.len()
    }

    pub fn validate(&self) -> Result<(), SimulateError> {
        let h = self.psi.len();
        for (a, row) in self.psi.iter().enumerate() {
            if row.len() != h {
                return Err(SimulateError::BadPsi(format!("row {a} has {} entries, expected {h}", row.len())));
            }
            for (b, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(SimulateError::BadPsi(format!("entry ({a},{b}) = {p} outside [0,1]")));
                }
                if p != self.psi[b][a] {
                    return Err(SimulateError::BadPsi(format!("entries ({a},{b}) and ({b},{a}) differ")));
                }
            }
        }
        let v: usize = self.layer_sizes.iter().sum();
        if self.z0.len() != v {
            return Err(SimulateError::BadAllocation(format!("{} labels for {v} nodes", self.z0.len())));
        }
        if let Some(&g) = self.z0.iter().find(|&&g| g >= h) {
            return Err(SimulateError::BadAllocation(format!("label {g} has no row in the matrix")));
        }
        Ok(())
    }

    /// Edge probability of dyad `(v, u)` under the generative model.
    pub fn edge_probability(&self, v: usize, u: usize) -> f64 {
        self.psi[self.z0[v]][self.z0[u]]
    }
}

/// Bernoulli draw of every dyad with probability `psi[z0[v]][z0[u]]`.
pub fn sample_sbm<R: Rng + ?Sized>(
    layer_sizes: &[usize],
    z0: &[usize],
    psi: &[Vec<f64>],
    rng: &mut R,
) -> Result<SupraNetwork, SimulateError> {
    let v_count = z0.len();
    let mut edges = Vec::new();
    for v in 1..v_count {
        for u in 0..v {
            if rng.random::<f64>() < psi[z0[v]][z0[u]] {
                edges.push((u, v));
            }
        }
    }
    Ok(SupraNetwork::from_layer_sizes(layer_sizes, &edges)?)
}

pub fn generate_scenario(spec: &ScenarioSpec) -> Result<(SupraNetwork, Vec<usize>), SimulateError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let net = sample_sbm(&spec.layer_sizes, &spec.z0, &spec.psi, &mut rng)?;
    Ok((net, spec.z0.clone()))
}

/// Prior draw of `(z, w)` in canonical labels, seating nodes one at a time
/// by the joint urn.
pub fn sample_prior_partition<R: Rng + ?Sized>(
    layer_sizes: &[usize],
    kernels: &PriorKernels,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>), SimulateError> {
    let layer_of: Vec<usize> = layer_sizes
        .iter()
        .enumerate()
        .flat_map(|(j, &s)| std::iter::repeat_n(j, s))
        .collect();
    let mut state = FranchiseState::empty(Vec::new(), layer_sizes.len())?;
    state.push_unassigned(&layer_of)?;
    seat_unassigned(&mut state, kernels, rng)?;
    Ok((state.canonical_z(), state.canonical_w()))
}

/// Writes `edges.txt`, `layers.tsv`, `z0.csv`, `psi.csv` and `spec.json`.
pub fn write_scenario(dir: &Path, spec: &ScenarioSpec, net: &SupraNetwork) -> Result<(), SimulateError> {
    fs::create_dir_all(dir)?;
    net.write_files(&dir.join("edges.txt"), &dir.join("layers.tsv"))?;
    write_allocation(&dir.join("z0.csv"), net, &spec.z0)?;
    let psi: String = spec
        .psi
        .iter()
        .map(|row| row.iter().map(|p| crate::posterior::format_sig(*p)).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(dir.join("psi.csv"), psi)?;
    fs::write(
        dir.join("spec.json"),
        serde_json::to_string_pretty(spec).map_err(NetworkError::from)?,
    )?;
    Ok(())
}

/// `node,group` CSV with one row per node.
pub fn write_allocation(path: &Path, net: &SupraNetwork, z: &[usize]) -> Result<(), SimulateError> {
    let mut out = String::from("node,group\n");
    for (id, g) in net.node_ids().iter().zip(z) {
        out.push_str(&format!("{id},{g}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a `node,group` CSV (header optional) into labels ordered as the
/// nodes of `net`.
pub fn read_allocation(path: &Path, net: &SupraNetwork) -> Result<Vec<usize>, SimulateError> {
    let text = fs::read_to_string(path)?;
    let parse_err = |msg: String| SimulateError::Parse { path: path.display().to_string(), msg };
    let index: std::collections::HashMap<&str, usize> =
        net.node_ids().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut z = vec![None; net.num_nodes()];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (id, g) = match (parts.next(), parts.next()) {
            (Some(id), Some(g)) => (id, g),
            _ => return Err(parse_err(format!("line {}: expected `node,group`", lineno + 1))),
        };
        let Ok(g) = g.parse::<usize>() else {
            if lineno == 0 {
                continue;
            }
            return Err(parse_err(format!("line {}: group `{g}` is not an integer", lineno + 1)));
        };
        let &v = index
            .get(id)
            .ok_or_else(|| parse_err(format!("line {}: unknown node `{id}`", lineno + 1)))?;
        z[v] = Some(g);
    }
    z.into_iter()
        .enumerate()
        .map(|(v, g)| g.ok_or_else(|| parse_err(format!("node `{}` has no group", net.node_ids()[v]))))
        .collect()
}

/// Reads a square comma-separated probability matrix.
pub fn read_psi(path: &Path) -> Result<Vec<Vec<f64>>, SimulateError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .map(|x| {
                    x.trim().parse::<f64>().map_err(|e| SimulateError::Parse {
                        path: path.display().to_string(),
                        msg: format!("row {}: {e}", i + 1),
                    })
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_layout() {
        let s = ScenarioSpec::scenario(1, 0).unwrap();
        assert_eq!(s.z0.len(), 80);
        assert_eq!(s.num_groups(), 8);
        assert_eq!(crate::franchise::canonical_labels(s.z0.iter().copied()), s.z0);
        let s2 = ScenarioSpec::scenario(2, 0).unwrap();
        assert!((s2.psi[0][0] - 0.5).abs() < 1e-12);
        assert!((s2.psi[0][3] - 0.2).abs() < 1e-12);
        assert!(ScenarioSpec::scenario(3, 0).is_err());
    }

    #[test]
    fn extreme_psi() {
        let base = ScenarioSpec::scenario(1, 4).unwrap();
        let zero = base.clone().with_psi(vec![vec![0.0; 8]; 8]).unwrap();
        assert_eq!(generate_scenario(&zero).unwrap().0.num_edges(), 0);
        let one = base.with_psi(vec![vec![1.0; 8]; 8]).unwrap();
        assert_eq!(generate_scenario(&one).unwrap().0.num_edges(), 80 * 79 / 2);
    }

    #[test]
    fn reproducible() {
        let s = ScenarioSpec::scenario(2, 11).unwrap();
        assert_eq!(generate_scenario(&s).unwrap().0, generate_scenario(&s).unwrap().0);
    }

    #[test]
    fn single_node_prior_draw() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = PriorKernels::hdp(1.0, 1.0).unwrap();
        assert_eq!(sample_prior_partition(&[1], &k, &mut rng).unwrap(), (vec![0], vec![0]));
    }

    #[test]
    fn bad_specs() {
        let s = ScenarioSpec::scenario(1, 0).unwrap();
        let mut psi = s.psi.clone();
        psi[0][1] = 0.9;
        assert!(s.clone().with_psi(psi).is_err());
        assert!(s.with_psi(vec![vec![0.5; 7]; 7]).is_err());
    }
}
