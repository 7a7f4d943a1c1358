use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cptrank::analysis::{AnalysisConfig, ControlMode};
use cptrank::report::{
    decompose_node, emit_curve, emit_report, profile_single, run_corpus, write_profile_csv, CorpusOptions,
    ProfileOptions, ReportFormat,
};
use cptrank::{Error, SolverConfig};

#[derive(Parser)]
#[command(name = "cptrank", version, about = "Effective CP rank of conditional probability tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverArgs {
    /// Worst-entry error threshold defining the minimal rank
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 20)]
    rmax: usize,
    /// Random starts per rank
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Add a start from leading singular vectors of each unfolding
    #[arg(long)]
    nvec: bool,
    #[arg(long, env = "CPTRANK_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
}

impl SolverArgs {
    fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            epsilon: self.epsilon,
            r_max: self.rmax,
            solver: SolverConfig {
                n_random_starts: self.restarts,
                use_nvec_start: self.nvec,
                seed: self.seed,
                max_iters: self.max_iters,
                ..SolverConfig::default()
            },
            warm_start: false,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Minimal ranks for every CPT with enough parents across networks
    Corpus {
        #[arg(long = "net", required = true, num_args = 1..)]
        nets: Vec<PathBuf>,
        #[arg(long, default_value_t = 3)]
        min_parents: usize,
        #[command(flatten)]
        solver: SolverArgs,
        /// Also analyze one random table per CPT
        #[arg(long)]
        controls: bool,
        #[arg(long, default_value_t = ControlMode::Normalized)]
        control_mode: ControlMode,
        #[arg(long)]
        jobs: Option<usize>,
        /// Fail on the first invalid file or CPT
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        curve: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Best error at each rank for one CPT
    Profile {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        node: String,
        #[arg(long, default_value_t = 3)]
        min_parents: usize,
        #[command(flatten)]
        solver: SolverArgs,
        /// Add a matched random table
        #[arg(long)]
        control: bool,
        #[arg(long, default_value_t = ControlMode::Normalized)]
        control_mode: ControlMode,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one CPT at a fixed rank and dump the model
    Decompose {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        node: String,
        #[arg(long)]
        rank: usize,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long)]
        nvec: bool,
        #[arg(long, env = "CPTRANK_SEED", default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        dump: PathBuf,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::UnknownNode { .. } => 1,
        Error::NonFinite(_) | Error::Structural(_) | Error::LengthMismatch { .. } => 3,
        _ => 2,
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> cptrank::Result<()>) -> cptrank::Result<()> {
    let mut out = File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    f(&mut out)?;
    out.flush().map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn run(cmd: Command) -> cptrank::Result<()> {
    match cmd {
        Command::Corpus { nets, min_parents, solver, controls, control_mode, jobs, strict, out, curve, json } => {
            let opts = CorpusOptions {
                min_parents,
                analysis: solver.analysis(),
                with_controls: controls,
                control_mode,
                strict,
                jobs,
            };
            let report = run_corpus(&nets, &opts)?;
            emit_report(&report, ReportFormat::Csv, &out)?;
            emit_curve(&report, &curve)?;
            if let Some(path) = json {
                emit_report(&report, ReportFormat::Json, &path)?;
            }
            log::info!(
                "{} CPTs, {} controls, {} unreadable files",
                report.cpt_records().count(),
                report.control_records().count(),
                report.file_errors.len()
            );
        }
        Command::Profile { net, node, min_parents, solver, control, control_mode, strict, out } => {
            let opts = ProfileOptions {
                min_parents,
                analysis: solver.analysis(),
                control: control.then_some(control_mode),
                lenient: !strict,
            };
            let outcome = profile_single(&net, &node, &opts)?;
            write_file(&out, |w| write_profile_csv(&outcome, w))?;
        }
        Command::Decompose { net, node, rank, restarts, nvec, seed, dump } => {
            let solver = SolverConfig {
                n_random_starts: restarts,
                use_nvec_start: nvec,
                seed,
                ..SolverConfig::default()
            };
            let (_, fit) = decompose_node(&net, &node, rank, &solver)?;
            log::info!("rank {rank}: max error {}, frobenius error {}", fit.max_error, fit.frob_error);
            write_file(&dump, |w| {
                serde_json::to_writer_pretty(&mut *w, &fit.model.normalized())?;
                Ok(())
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
