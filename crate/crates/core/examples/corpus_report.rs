//! Minimal ranks across a set of networks, written as CSV and JSON.
//!
//! cargo run --release --example corpus_report [out_dir] [file.net...]
//!
//! Uses a reduced rank ceiling so it finishes quickly; the `cptrank corpus`
//! binary runs with the full defaults.

use std::path::PathBuf;

use cptrank::analysis::AnalysisConfig;
use cptrank::report::{emit_curve, emit_report, run_corpus, CorpusOptions, ReportFormat};

fn main() -> cptrank::Result<()> {
    let mut args = std::env::args().skip(1);
    let out_dir = PathBuf::from(args.next().unwrap_or_else(|| std::env::temp_dir().display().to_string()));
    let mut nets: Vec<PathBuf> = args.map(PathBuf::from).collect();
    if nets.is_empty() {
        nets.push(PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/alarm.net")));
    }
    let opts = CorpusOptions {
        analysis: AnalysisConfig {
            r_max: 10,
            ..Default::default()
        },
        with_controls: true,
        ..Default::default()
    };
    let report = run_corpus(&nets, &opts)?;

    for rec in report.cpt_records() {
        println!("{}/{} {:?}: minimal rank {}", rec.network, rec.node, rec.dims, rec.minimal_rank);
    }
    println!("rank  cpt%   control%");
    for p in &report.curve {
        println!("{:>4}  {:>5.1}  {:>5.1}", p.rank, p.percentage, report.control_percentage_at(p.rank).unwrap_or(0.0));
    }

    emit_report(&report, ReportFormat::Csv, &out_dir.join("report.csv"))?;
    emit_report(&report, ReportFormat::Json, &out_dir.join("report.json"))?;
    emit_curve(&report, &out_dir.join("curve.csv"))?;
    println!("wrote report.csv, report.json, curve.csv to {}", out_dir.display());
    Ok(())
}
