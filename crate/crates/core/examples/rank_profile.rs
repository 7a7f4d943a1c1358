//! Best max error at each rank for one CPT, next to a random table of the
//! same shape.
//!
//! cargo run --release --example rank_profile [file.net] [node]

use std::path::PathBuf;

use cptrank::analysis::{AnalysisConfig, ControlMode};
use cptrank::report::{profile_single, ProfileOptions};

fn main() -> cptrank::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/hailfinder.net")));
    let node = args.next().unwrap_or_else(|| "Boundaries".to_string());
    let opts = ProfileOptions {
        analysis: AnalysisConfig {
            r_max: 12,
            ..Default::default()
        },
        control: Some(ControlMode::Normalized),
        ..Default::default()
    };
    let out = profile_single(&path, &node, &opts)?;
    println!("{}/{} dims {:?}", out.network, out.node, out.dims);
    println!("rank  cpt          control");
    let control = out.control.as_ref().expect("control requested");
    for entry in &out.profile.entries {
        let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3e}"));
        println!("{:>4}  {:<11}  {}", entry.rank, fmt(entry.max_error), fmt(control.max_error(entry.rank)));
    }
    let eps = opts.analysis.epsilon;
    println!("minimal rank at {eps}: cpt {}, control {}", out.profile.minimal_rank(eps), control.minimal_rank(eps));
    Ok(())
}
