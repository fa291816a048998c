//! Node-colored networks stored as a supra-adjacency matrix whose nodes are
//! grouped contiguously by layer.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("edge file references unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` has no layer label")]
    MissingLayer(String),
    #[error("self-loop on node `{0}`")]
    SelfLoop(String),
    #[error("node `{0}` is listed twice in the layer file")]
    DuplicateNode(String),
    #[error("network has no nodes")]
    Empty,
    #[error("allocation has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> NetworkError + '_ {
    move |source| NetworkError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A binary undirected network whose nodes are partitioned into layers.
///
/// Node `v` belongs to layer `layer_of[v]`, and the nodes of each layer form
/// one contiguous index range, layer 0 first.
#[derive(Clone, Debug, PartialEq)]
pub struct SupraNetwork {
    node_ids: Vec<String>,
    layer_labels: Vec<String>,
    layer_of: Vec<usize>,
    layer_sizes: Vec<usize>,
    adj: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
}

impl SupraNetwork {
    /// Builds a network from per-node layer indices (which must already be
    /// sorted so layers are contiguous) and a list of undirected edges.
    pub fn new(
        node_ids: Vec<String>,
        layer_labels: Vec<String>,
        layer_of: Vec<usize>,
        edges: &[(usize, usize)],
    ) -> Result<Self, NetworkError> {
        let v = layer_of.len();
        if v == 0 {
            return Err(NetworkError::Empty);
        }
        if node_ids.len() != v {
            return Err(NetworkError::Invalid(format!(
                "{} node ids for {v} nodes",
                node_ids.len()
            )));
        }
        let d = layer_labels.len();
        let mut layer_sizes = vec![0; d];
        for (i, &j) in layer_of.iter().enumerate() {
            if j >= d {
                return Err(NetworkError::Invalid(format!("node {i} has layer {j} >= {d}")));
            }
            if i > 0 && j < layer_of[i - 1] {
                return Err(NetworkError::Invalid("layers are not contiguous".into()));
            }
            layer_sizes[j] += 1;
        }
        if let Some(j) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(NetworkError::Invalid(format!("layer `{}` is empty", layer_labels[j])));
        }
        let mut adj = vec![false; v * v];
        for &(a, b) in edges {
            if a >= v || b >= v {
                return Err(NetworkError::Invalid(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(NetworkError::SelfLoop(node_ids[a].clone()));
            }
            adj[a * v + b] = true;
            adj[b * v + a] = true;
        }
        let neighbors = (0..v)
            .map(|a| (0..v).filter(|&b| adj[a * v + b]).collect())
            .collect();
        Ok(Self {
            node_ids,
            layer_labels,
            layer_of,
            layer_sizes,
            adj,
            neighbors,
        })
    }

    /// Anonymous network with nodes named `1..=V` and layers `L1..=Ld`.
    pub fn from_layer_sizes(
        layer_sizes: &[usize],
        edges: &[(usize, usize)],
    ) -> Result<Self, NetworkError> {
        let layer_of: Vec<usize> = layer_sizes
            .iter()
            .enumerate()
            .flat_map(|(j, &s)| std::iter::repeat_n(j, s))
            .collect();
        let ids = (1..=layer_of.len()).map(|i| i.to_string()).collect();
        let labels = (1..=layer_sizes.len()).map(|j| format!("L{j}")).collect();
        Self::new(ids, labels, layer_of, edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.layer_of.len()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn layer_of(&self, v: usize) -> usize {
        self.layer_of[v]
    }

    pub fn layers(&self) -> &[usize] {
        &self.layer_of
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layer_labels(&self) -> &[String] {
        &self.layer_labels
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn layer_index(&self, label: &str) -> Option<usize> {
        self.layer_labels.iter().position(|l| l == label)
    }

    #[inline]
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a * self.num_nodes() + b]
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn num_dyads(&self) -> usize {
        let v = self.num_nodes();
        v * (v - 1) / 2
    }

    /// Edges `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for a in 0..self.num_nodes() {
            for &b in &self.neighbors[a] {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// The network restricted to `keep` (sorted ascending, node order preserved).
    pub fn subnetwork(&self, keep: &[usize]) -> Result<Self, NetworkError> {
        let mut index = vec![usize::MAX; self.num_nodes()];
        for (new, &old) in keep.iter().enumerate() {
            index[old] = new;
        }
        let used: Vec<bool> = (0..self.num_layers())
            .map(|j| keep.iter().any(|&v| self.layer_of[v] == j))
            .collect();
        let remap: Vec<usize> = used
            .iter()
            .scan(0, |next, &u| {
                let out = *next;
                if u {
                    *next += 1;
                }
                Some(out)
            })
            .collect();
        let labels = self
            .layer_labels
            .iter()
            .zip(&used)
            .filter(|(_, &u)| u)
            .map(|(l, _)| l.clone())
            .collect();
        let edges: Vec<(usize, usize)> = self
            .edges()
            .into_iter()
            .filter(|&(a, b)| index[a] != usize::MAX && index[b] != usize::MAX)
            .map(|(a, b)| (index[a], index[b]))
            .collect();
        Self::new(
            keep.iter().map(|&v| self.node_ids[v].clone()).collect(),
            labels,
            keep.iter().map(|&v| remap[self.layer_of[v]]).collect(),
            &edges,
        )
    }

    pub fn to_json(&self) -> Result<String, NetworkError> {
        Ok(serde_json::to_string_pretty(&NetworkJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self, NetworkError> {
        let j: NetworkJson = serde_json::from_str(s)?;
        Self::new(j.node_ids, j.layer_labels, j.layer_of, &j.edges)
    }

    /// Writes the edge-list and layer files read by [`load_network`].
    pub fn write_files(&self, edge_path: &Path, layer_path: &Path) -> Result<(), NetworkError> {
        let mut edges = String::new();
        for (a, b) in self.edges() {
            edges.push_str(&format!("{} {}\n", self.node_ids[a], self.node_ids[b]));
        }
        fs::write(edge_path, edges).map_err(io_err(edge_path))?;
        let mut layers = String::new();
        for v in 0..self.num_nodes() {
            layers.push_str(&format!(
                "{}\t{}\n",
                self.node_ids[v], self.layer_labels[self.layer_of[v]]
            ));
        }
        fs::write(layer_path, layers).map_err(io_err(layer_path))?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    node_ids: Vec<String>,
    layer_labels: Vec<String>,
    layer_of: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

impl From<&SupraNetwork> for NetworkJson {
    fn from(n: &SupraNetwork) -> Self {
        Self {
            node_ids: n.node_ids.clone(),
            layer_labels: n.layer_labels.clone(),
            layer_of: n.layer_of.clone(),
            edges: n.edges(),
        }
    }
}

/// Result of reading a network from text files.
#[derive(Clone, Debug)]
pub struct LoadedNetwork {
    pub network: SupraNetwork,
    /// Repeated dyads in the edge file that were dropped.
    pub duplicate_edges: usize,
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses `node_id<TAB>layer_label` lines; first-appearance order fixes both
/// layer indices and node order within a layer.
fn read_layer_file(path: &Path) -> Result<Vec<(String, String)>, NetworkError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (line, l) in content_lines(&text) {
        let mut parts = if l.contains('\t') {
            l.split('\t').map(str::trim).collect::<Vec<_>>()
        } else {
            l.split_whitespace().collect()
        };
        parts.retain(|p| !p.is_empty());
        if parts.len() != 2 {
            return Err(NetworkError::Parse {
                path: path.display().to_string(),
                line,
                msg: format!("expected `node_id<TAB>layer_label`, got `{l}`"),
            });
        }
        out.push((parts[0].to_string(), parts[1].to_string()));
    }
    Ok(out)
}

/// Orders nodes so layers are contiguous; returns (ids, labels, layer_of, old->new).
fn contiguous_layout(
    assignments: &[(String, String)],
) -> Result<(Vec<String>, Vec<String>, Vec<usize>, HashMap<String, usize>), NetworkError> {
    let mut labels: Vec<String> = Vec::new();
    let mut members: Vec<Vec<String>> = Vec::new();
    let mut seen = HashSet::new();
    for (node, label) in assignments {
        if !seen.insert(node.clone()) {
            return Err(NetworkError::DuplicateNode(node.clone()));
        }
        let j = match labels.iter().position(|l| l == label) {
            Some(j) => j,
            None => {
                labels.push(label.clone());
                members.push(Vec::new());
                labels.len() - 1
            }
        };
        members[j].push(node.clone());
    }
    let mut ids = Vec::new();
    let mut layer_of = Vec::new();
    let mut index = HashMap::new();
    for (j, nodes) in members.into_iter().enumerate() {
        for node in nodes {
            index.insert(node.clone(), ids.len());
            ids.push(node);
            layer_of.push(j);
        }
    }
    Ok((ids, labels, layer_of, index))
}

/// Reads an undirected edge list (one whitespace-separated dyad per line) and
/// a layer file (`node_id<TAB>layer_label` per line).
pub fn load_network(edge_path: &Path, layer_path: &Path) -> Result<LoadedNetwork, NetworkError> {
    let assignments = read_layer_file(layer_path)?;
    let (ids, labels, layer_of, index) = contiguous_layout(&assignments)?;
    let text = fs::read_to_string(edge_path).map_err(io_err(edge_path))?;
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    let mut duplicate_edges = 0;
    for (line, l) in content_lines(&text) {
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(NetworkError::Parse {
                path: edge_path.display().to_string(),
                line,
                msg: format!("expected two node ids, got `{l}`"),
            });
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| NetworkError::UnknownNode(id.to_string()))
        };
        let (a, b) = (lookup(parts[0])?, lookup(parts[1])?);
        if a == b {
            return Err(NetworkError::SelfLoop(parts[0].to_string()));
        }
        if seen.insert((a.min(b), a.max(b))) {
            edges.push((a, b));
        } else {
            duplicate_edges += 1;
        }
    }
    if duplicate_edges > 0 {
        log::warn!("{}: dropped {duplicate_edges} duplicate edges", edge_path.display());
    }
    Ok(LoadedNetwork {
        network: SupraNetwork::new(ids, labels, layer_of, &edges)?,
        duplicate_edges,
    })
}

/// Reads a dense square 0/1 adjacency matrix (comma- or whitespace-separated,
/// one row per line) plus a file with one layer label per line in row order.
///
/// This is the layout of the pre-processed criminal-network data that
/// circulates as an adjacency matrix and a vector of *locale* labels. Node
/// ids are the 1-based row numbers.
pub fn load_adjacency_matrix(
    matrix_path: &Path,
    layer_path: &Path,
) -> Result<LoadedNetwork, NetworkError> {
    let text = fs::read_to_string(matrix_path).map_err(io_err(matrix_path))?;
    let mut rows: Vec<Vec<bool>> = Vec::new();
    for (line, l) in content_lines(&text) {
        let row: Result<Vec<bool>, _> = l
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| match t.trim_matches('"') {
                "0" | "0.0" => Ok(false),
                "1" | "1.0" => Ok(true),
                other => Err(NetworkError::Parse {
                    path: matrix_path.display().to_string(),
                    line,
                    msg: format!("non-binary entry `{other}`"),
                }),
            })
            .collect();
        rows.push(row?);
    }
    let v = rows.len();
    if rows.iter().any(|r| r.len() != v) {
        return Err(NetworkError::Invalid("adjacency matrix is not square".into()));
    }
    let ltext = fs::read_to_string(layer_path).map_err(io_err(layer_path))?;
    let labels: Vec<&str> = content_lines(&ltext).map(|(_, l)| l.trim_matches('"')).collect();
    if labels.len() != v {
        return Err(NetworkError::LengthMismatch {
            expected: v,
            got: labels.len(),
        });
    }
    let assignments: Vec<(String, String)> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| ((i + 1).to_string(), l.to_string()))
        .collect();
    let (ids, layer_labels, layer_of, index) = contiguous_layout(&assignments)?;
    let mut edges = Vec::new();
    for a in 0..v {
        if rows[a][a] {
            return Err(NetworkError::SelfLoop((a + 1).to_string()));
        }
        for b in (a + 1)..v {
            if rows[a][b] != rows[b][a] {
                return Err(NetworkError::Invalid(format!(
                    "adjacency matrix is not symmetric at ({}, {})",
                    a + 1,
                    b + 1
                )));
            }
            if rows[a][b] {
                edges.push((index[&(a + 1).to_string()], index[&(b + 1).to_string()]));
            }
        }
    }
    Ok(LoadedNetwork {
        network: SupraNetwork::new(ids, layer_labels, layer_of, &edges)?,
        duplicate_edges: 0,
    })
}

/// Edge and non-edge tallies between every pair of groups of an allocation.
///
/// `edges[h][g]` counts edges between groups `h` and `g` (within-group dyads
/// once); `non_edges` likewise.
pub fn induced_counts(
    net: &SupraNetwork,
    z: &[usize],
) -> Result<(Vec<Vec<u64>>, Vec<Vec<u64>>), NetworkError> {
    if z.len() != net.num_nodes() {
        return Err(NetworkError::LengthMismatch {
            expected: net.num_nodes(),
            got: z.len(),
        });
    }
    let h = z.iter().copied().max().map_or(0, |m| m + 1);
    let mut m = vec![vec![0u64; h]; h];
    let mut mbar = vec![vec![0u64; h]; h];
    for a in 0..z.len() {
        for b in 0..a {
            let (g1, g2) = (z[a], z[b]);
            let target = if net.has_edge(a, b) { &mut m } else { &mut mbar };
            target[g1][g2] += 1;
            if g1 != g2 {
                target[g2][g1] += 1;
            }
        }
    }
    Ok((m, mbar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn minimal_graph() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.txt", "a b\n");
        let l = write(dir.path(), "l.tsv", "a\tL1\nb\tL2\n");
        let net = load_network(&e, &l).unwrap().network;
        assert_eq!(net.num_nodes(), 2);
        assert_eq!(net.num_layers(), 2);
        assert!(net.has_edge(0, 1) && net.has_edge(1, 0));
        assert!(!net.has_edge(0, 0));
    }

    #[test]
    fn single_node_no_edges() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.txt", "");
        let l = write(dir.path(), "l.tsv", "a\tL1\n");
        let net = load_network(&e, &l).unwrap().network;
        assert_eq!(net.num_nodes(), 1);
        assert_eq!(net.num_edges(), 0);
    }

    #[test]
    fn layers_become_contiguous() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.txt", "x y\ny z\n");
        let l = write(dir.path(), "l.tsv", "x\tA\ny\tB\nz\tA\n");
        let net = load_network(&e, &l).unwrap().network;
        assert_eq!(net.node_ids(), &["x", "z", "y"]);
        assert_eq!(net.layers(), &[0, 0, 1]);
        assert_eq!(net.layer_sizes(), &[2, 1]);
        // x-y and y-z
        assert!(net.has_edge(0, 2) && net.has_edge(1, 2) && !net.has_edge(0, 1));
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let l = write(dir.path(), "l.tsv", "a\tL1\nb\tL1\n");
        let unknown = write(dir.path(), "e1.txt", "a c\n");
        assert!(matches!(load_network(&unknown, &l), Err(NetworkError::UnknownNode(n)) if n == "c"));
        let loop_ = write(dir.path(), "e2.txt", "a a\n");
        assert!(matches!(load_network(&loop_, &l), Err(NetworkError::SelfLoop(_))));
        let dup = write(dir.path(), "e3.txt", "a b\nb a\na b\n");
        let loaded = load_network(&dup, &l).unwrap();
        assert_eq!(loaded.duplicate_edges, 2);
        assert_eq!(loaded.network.num_edges(), 1);
        let l_missing = write(dir.path(), "l2.tsv", "a\tL1\n");
        let e = write(dir.path(), "e4.txt", "a b\n");
        assert!(matches!(load_network(&e, &l_missing), Err(NetworkError::UnknownNode(_))));
    }

    #[test]
    fn infinito_style_matrix() {
        // 84 nodes spread over 5 locali, a ring of edges.
        let dir = tempfile::tempdir().unwrap();
        let v = 84;
        let mut m = String::new();
        for a in 0..v {
            let row: Vec<&str> = (0..v)
                .map(|b| if (a + 1) % v == b || (b + 1) % v == a { "1" } else { "0" })
                .collect();
            m.push_str(&row.join(","));
            m.push('\n');
        }
        let labels: String = (0..v).map(|i| format!("\"locale{}\"\n", i % 5)).collect();
        let mp = write(dir.path(), "Y.csv", &m);
        let lp = write(dir.path(), "locale.csv", &labels);
        let net = load_adjacency_matrix(&mp, &lp).unwrap().network;
        assert_eq!(net.num_nodes(), 84);
        assert_eq!(net.num_layers(), 5);
        assert_eq!(net.num_edges(), 84);
    }

    #[test]
    fn counts_small_cases() {
        let net = SupraNetwork::from_layer_sizes(&[2], &[(0, 1)]).unwrap();
        let (m, mbar) = induced_counts(&net, &[0, 0]).unwrap();
        assert_eq!((m[0][0], mbar[0][0]), (1, 0));

        let net = SupraNetwork::from_layer_sizes(&[3], &[]).unwrap();
        let (m, mbar) = induced_counts(&net, &[0, 1, 0]).unwrap();
        assert_eq!(mbar[0][0], 1);
        assert_eq!(mbar[0][1], 2);
        assert!(m.iter().flatten().all(|&x| x == 0));
        assert!(induced_counts(&net, &[0, 0]).is_err());
    }

    #[test]
    fn json_and_file_round_trip() {
        let net = SupraNetwork::from_layer_sizes(&[2, 3], &[(0, 3), (1, 2), (2, 4)]).unwrap();
        assert_eq!(SupraNetwork::from_json(&net.to_json().unwrap()).unwrap(), net);
        let dir = tempfile::tempdir().unwrap();
        let (e, l) = (dir.path().join("e"), dir.path().join("l"));
        net.write_files(&e, &l).unwrap();
        assert_eq!(load_network(&e, &l).unwrap().network, net);
    }
}
