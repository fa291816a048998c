//! Builds a small two-layer network, writes it in the edge-list/layer-file
//! format, reads it back and tallies block edges for an allocation.
//!
//! cargo run -p pexsbm --example network_io

use pexsbm::network::{induced_counts, load_network, SupraNetwork};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ids = ["ann", "bob", "cy", "dee", "eve"].map(String::from).to_vec();
    let labels = vec!["north".to_string(), "south".to_string()];
    let net = SupraNetwork::new(ids, labels, vec![0, 0, 0, 1, 1], &[(0, 1), (1, 2), (2, 3), (3, 4)])?;
    println!("{} nodes, {} layers, {} edges", net.num_nodes(), net.num_layers(), net.num_edges());

    let dir = tempfile_dir()?;
    let (edges, layers) = (dir.join("edges.txt"), dir.join("layers.tsv"));
    net.write_files(&edges, &layers)?;
    let loaded = load_network(&edges, &layers)?;
    assert_eq!(loaded.network, net);
    println!("round trip through {} ok", dir.display());

    let z = [0, 0, 1, 1, 1];
    let (m, mbar) = induced_counts(&net, &z)?;
    for h in 0..2 {
        for g in h..2 {
            println!("blocks ({h},{g}): {} edges, {} non-edges", m[h][g], mbar[h][g]);
        }
    }
    std::fs::remove_dir_all(dir)?;
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join(format!("pexsbm-network-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
