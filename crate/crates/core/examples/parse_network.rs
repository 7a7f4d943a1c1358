//! Load a HUGIN `.net` file and list the tables with three or more parents.
//!
//! cargo run --release --example parse_network [path/to/file.net]

use std::path::PathBuf;

use cptrank::analysis::general_param_count;
use cptrank::net::{load_network, select_cpts, ParseOptions};

fn main() -> cptrank::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/hailfinder.net")));
    let (net, violations) = load_network(&path, &ParseOptions::default())?;
    println!("{}: {} nodes", net.name(), net.nodes().len());
    for v in &violations {
        println!("warning: {v}");
    }
    for node in select_cpts(&net, 3) {
        let dims = net.cpt_dims(node);
        println!(
            "  {:<14} parents {:<50} dims {:?}  params {}",
            node.name,
            node.parents.join(", "),
            dims,
            general_param_count(&dims)
        );
    }
    Ok(())
}
