//! Write synthetic datasets to disk in the canonical directory format the
//! CLI consumes (`graph.edges`, `features.csv`, `labels.csv`).
//!
//!     cargo run --example make_dataset -- out/sbm out/hetero

use std::path::Path;

use adagpr::data::{generate_heterophilous, generate_sbm, write_dataset};

fn main() -> adagpr::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let sbm_dir = args.get(1).map_or("out/sbm", String::as_str);
    let hetero_dir = args.get(2).map_or("out/hetero", String::as_str);

    let sbm = generate_sbm(100, 3, 0.1, 0.01, 12, 1.0, 0)?;
    write_dataset(&sbm, Path::new(sbm_dir))?;
    println!(
        "{sbm_dir}: {} nodes, {} undirected edges, {} classes",
        sbm.num_nodes(),
        sbm.graph.num_undirected_edges(),
        sbm.num_classes
    );

    let hetero = generate_heterophilous(120, 8, 0)?;
    write_dataset(&hetero, Path::new(hetero_dir))?;
    println!(
        "{hetero_dir}: {} nodes, {} undirected edges, {} classes",
        hetero.num_nodes(),
        hetero.graph.num_undirected_edges(),
        hetero.num_classes
    );
    println!("train with: adagpr train --dataset {sbm_dir} --model adagpr --split random --out out/run");
    Ok(())
}
