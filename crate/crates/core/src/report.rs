//! Corpus experiments and their CSV/JSON output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    cp_param_count_general, general_param_count, minimal_rank_profile, random_table_like, rank_profile,
    AnalysisConfig, ControlMode, MinimalRank, ProfileSource, RankEntry, RankProfile,
};
use crate::decomp::{multi_start_decompose, FitResult, SolverConfig};
use crate::error::{Error, Result};
use crate::net::{cpt_to_tensor, load_network, select_cpts, Network, ParseOptions, CPT_TOLERANCE};
use crate::tensor::Tensor;

/// Header of the per-rank records CSV.
pub const RECORD_COLUMNS: [&str; 10] = [
    "network",
    "node",
    "dims",
    "rank",
    "max_error",
    "frob_error",
    "minimal_rank",
    "general_params",
    "cp_params",
    "source",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusOptions {
    pub min_parents: usize,
    pub analysis: AnalysisConfig,
    pub with_controls: bool,
    pub control_mode: ControlMode,
    /// Abort on the first unreadable or invalid file instead of recording it.
    pub strict: bool,
    /// Worker threads; `None` uses the global rayon pool.
    pub jobs: Option<usize>,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            min_parents: 3,
            analysis: AnalysisConfig::default(),
            with_controls: false,
            control_mode: ControlMode::Normalized,
            strict: false,
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSource {
    Cpt,
    Control { seed: u64 },
}

impl RecordSource {
    pub fn is_control(&self) -> bool {
        matches!(self, RecordSource::Control { .. })
    }

    fn label(&self) -> &'static str {
        match self {
            RecordSource::Cpt => "cpt",
            RecordSource::Control { .. } => "control",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CptRecord {
    pub network: String,
    pub node: String,
    /// CPT dims, parents first, child last.
    pub dims: Vec<usize>,
    /// Parents of cardinality one, dropped before decomposition.
    pub squeezed_parents: Vec<String>,
    pub source: RecordSource,
    pub minimal_rank: MinimalRank,
    /// Best errors for each rank tried, from 1 up to the minimal rank (or
    /// `r_max` when no rank qualified).
    pub ranks: Vec<RankEntry>,
    pub general_params: u64,
    /// CP parameter count at the minimal rank.
    pub cp_params: Option<u64>,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rank: usize,
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileError {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    /// Sorted by network, node, then real CPT before its control.
    pub records: Vec<CptRecord>,
    /// Percentage of real CPTs with minimal rank `<= r`, for `r = 1..=r_max`.
    pub curve: Vec<CurvePoint>,
    /// Same for the random controls; empty without controls.
    pub control_curve: Vec<CurvePoint>,
    pub file_errors: Vec<FileError>,
    pub warnings: Vec<String>,
    pub config: AnalysisConfig,
    pub min_parents: usize,
    pub with_controls: bool,
    pub control_mode: ControlMode,
    pub seed: u64,
}

impl CorpusReport {
    pub fn cpt_records(&self) -> impl Iterator<Item = &CptRecord> {
        self.records.iter().filter(|r| !r.source.is_control())
    }

    pub fn control_records(&self) -> impl Iterator<Item = &CptRecord> {
        self.records.iter().filter(|r| r.source.is_control())
    }

    pub fn percentage_at(&self, rank: usize) -> Option<f64> {
        self.curve.iter().find(|p| p.rank == rank).map(|p| p.percentage)
    }

    pub fn control_percentage_at(&self, rank: usize) -> Option<f64> {
        self.control_curve.iter().find(|p| p.rank == rank).map(|p| p.percentage)
    }
}

/// 64-bit FNV-1a, used to derive stable per-table control seeds.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

pub fn control_seed(seed: u64, network: &str, node: &str) -> u64 {
    seed ^ fnv1a(format!("{network}/{node}").as_bytes())
}

fn dims_label(dims: &[usize]) -> String {
    dims.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

struct Job {
    network: String,
    node: String,
    dims: Vec<usize>,
    squeezed_parents: Vec<String>,
    source: RecordSource,
    tensor: Tensor,
}

/// Drop cardinality-one parents, keeping at least two modes.
fn squeeze_cpt(tensor: &Tensor, parents: &[String]) -> (Tensor, Vec<String>) {
    let (squeezed, removed) = tensor.squeeze();
    if squeezed.order() < 2 || removed.is_empty() {
        return (tensor.clone(), Vec::new());
    }
    let names = removed.iter().filter_map(|&m| parents.get(m).cloned()).collect();
    (squeezed, names)
}

fn percentage_curve<'a>(records: impl Iterator<Item = &'a CptRecord> + Clone, r_max: usize) -> Vec<CurvePoint> {
    let total = records.clone().count();
    if total == 0 {
        return Vec::new();
    }
    (1..=r_max)
        .map(|rank| {
            let hit = records.clone().filter(|r| r.minimal_rank.at_most(rank)).count();
            CurvePoint {
                rank,
                percentage: 100.0 * hit as f64 / total as f64,
            }
        })
        .collect()
}

fn analyze(job: Job, cfg: &AnalysisConfig) -> Result<CptRecord> {
    let (minimal, profile) = minimal_rank_profile(&job.tensor, cfg)?;
    if profile.entries.iter().all(|e| e.max_error.is_none()) {
        return Err(Error::NonFinite(format!(
            "{}/{} ({}): no rank produced a finite fit",
            job.network,
            job.node,
            job.source.label()
        )));
    }
    log::info!(
        "{}/{} [{}] {}: minimal rank {}",
        job.network,
        job.node,
        dims_label(&job.dims),
        job.source.label(),
        minimal
    );
    Ok(CptRecord {
        general_params: general_param_count(&job.dims),
        cp_params: minimal.rank().map(|r| cp_param_count_general(job.tensor.dims(), r)),
        network: job.network,
        node: job.node,
        dims: job.dims,
        squeezed_parents: job.squeezed_parents,
        source: job.source,
        minimal_rank: minimal,
        ranks: profile.entries,
        diagnostics: profile.diagnostics,
    })
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Analyze every CPT with at least `min_parents` parents across `paths`.
///
/// Files that fail to load are recorded in `file_errors` (or abort the run
/// when `strict`). With controls, each CPT gets one random table of identical
/// dims, analyzed the same way and kept out of the real-CPT curve.
pub fn run_corpus(paths: &[PathBuf], opts: &CorpusOptions) -> Result<CorpusReport> {
    opts.analysis.validate()?;
    let parse_opts = ParseOptions {
        tolerance: CPT_TOLERANCE,
        lenient: !opts.strict,
    };
    let seed = opts.analysis.solver.seed;
    let mut file_errors = Vec::new();
    let mut warnings = Vec::new();
    let mut jobs = Vec::new();

    for path in paths {
        let (net, violations) = match load_network(path, &parse_opts) {
            Ok(loaded) => loaded,
            Err(e) if !opts.strict => {
                log::warn!("skipping {}: {e}", path.display());
                file_errors.push(FileError {
                    path: path.display().to_string(),
                    message: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        for v in violations {
            log::warn!("{}: {v}", net.name());
            warnings.push(format!("{}: {v}", net.name()));
        }
        collect_jobs(&net, opts, seed, &mut jobs)?;
    }
    if jobs.is_empty() {
        let msg = format!("no CPTs with at least {} parents selected", opts.min_parents);
        log::warn!("{msg}");
        warnings.push(msg);
    }
    jobs.sort_by(|a, b| {
        (&a.network, &a.node, a.source.is_control()).cmp(&(&b.network, &b.node, b.source.is_control()))
    });

    let cfg = &opts.analysis;
    let results: Vec<Result<CptRecord>> =
        with_pool(opts.jobs, || jobs.into_par_iter().map(|job| analyze(job, cfg)).collect())?;
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;

    let real = records.iter().filter(|r| !r.source.is_control());
    let controls = records.iter().filter(|r| r.source.is_control());
    let curve = percentage_curve(real, cfg.r_max);
    let control_curve = if opts.with_controls {
        percentage_curve(controls, cfg.r_max)
    } else {
        Vec::new()
    };
    Ok(CorpusReport {
        records,
        curve,
        control_curve,
        file_errors,
        warnings,
        config: cfg.clone(),
        min_parents: opts.min_parents,
        with_controls: opts.with_controls,
        control_mode: opts.control_mode,
        seed,
    })
}

fn collect_jobs(net: &Network, opts: &CorpusOptions, seed: u64, jobs: &mut Vec<Job>) -> Result<()> {
    for node in select_cpts(net, opts.min_parents) {
        let full = cpt_to_tensor(node, net)?;
        let (tensor, squeezed_parents) = squeeze_cpt(&full, &node.parents);
        if opts.with_controls {
            let cseed = control_seed(seed, net.name(), &node.name);
            let control = random_table_like(full.dims(), cseed, opts.control_mode)?;
            let (control, _) = squeeze_cpt(&control, &node.parents);
            jobs.push(Job {
                network: net.name().to_string(),
                node: node.name.clone(),
                dims: full.dims().to_vec(),
                squeezed_parents: squeezed_parents.clone(),
                source: RecordSource::Control { seed: cseed },
                tensor: control,
            });
        }
        jobs.push(Job {
            network: net.name().to_string(),
            node: node.name.clone(),
            dims: full.dims().to_vec(),
            squeezed_parents,
            source: RecordSource::Cpt,
            tensor,
        });
    }
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per (record, rank tried).
pub fn write_records_csv<W: Write>(report: &CorpusReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for rec in &report.records {
        let minimal = match rec.minimal_rank {
            MinimalRank::Rank(r) => r.to_string(),
            MinimalRank::ExceedsMax => format!(">{}", report.config.r_max),
        };
        let dims = dims_label(&rec.dims);
        let general = rec.general_params.to_string();
        let cp = rec.cp_params.map(|c| c.to_string()).unwrap_or_default();
        for entry in &rec.ranks {
            w.write_record([
                rec.network.as_str(),
                rec.node.as_str(),
                dims.as_str(),
                &entry.rank.to_string(),
                &fmt_opt(entry.max_error),
                &fmt_opt(entry.frob_error),
                minimal.as_str(),
                general.as_str(),
                cp.as_str(),
                rec.source.label(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// `rank,percentage,control_percentage`; the control column is empty when
/// the run had no controls.
pub fn write_curve_csv<W: Write>(report: &CorpusReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "percentage", "control_percentage"])?;
    for point in &report.curve {
        let control = fmt_opt(report.control_percentage_at(point.rank));
        w.write_record([point.rank.to_string(), point.percentage.to_string(), control])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Write the records as CSV or the whole report as JSON.
pub fn emit_report(report: &CorpusReport, format: ReportFormat, path: &Path) -> Result<()> {
    let mut file = create(path)?;
    match format {
        ReportFormat::Csv => write_records_csv(report, &mut file)?,
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut file, report)?;
            file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
    }
    file.flush().map_err(|e| Error::io(path, e))
}

pub fn emit_curve(report: &CorpusReport, path: &Path) -> Result<()> {
    let mut file = create(path)?;
    write_curve_csv(report, &mut file)?;
    file.flush().map_err(|e| Error::io(path, e))
}

pub fn load_report_json(path: &Path) -> Result<CorpusReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileOptions {
    pub min_parents: usize,
    pub analysis: AnalysisConfig,
    pub control: Option<ControlMode>,
    pub lenient: bool,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            min_parents: 3,
            analysis: AnalysisConfig::default(),
            control: None,
            lenient: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileOutcome {
    pub network: String,
    pub node: String,
    pub dims: Vec<usize>,
    pub profile: RankProfile,
    pub control: Option<RankProfile>,
}

fn find_node<'a>(net: &'a Network, name: &str, min_parents: usize) -> Result<&'a crate::net::NodeSpec> {
    let candidates = || -> Vec<String> {
        select_cpts(net, min_parents).into_iter().map(|n| n.name.clone()).collect()
    };
    let node = net.node(name).ok_or_else(|| Error::UnknownNode {
        name: name.to_string(),
        available: candidates(),
    })?;
    if node.parents.len() < min_parents {
        return Err(Error::InvalidConfig(format!(
            "node `{name}` has {} parents, fewer than the minimum of {min_parents}; candidates: {}",
            node.parents.len(),
            candidates().join(", ")
        )));
    }
    Ok(node)
}

/// Full rank profile of one CPT and, optionally, of a matched random table.
pub fn profile_single(path: &Path, node: &str, opts: &ProfileOptions) -> Result<ProfileOutcome> {
    let parse_opts = ParseOptions {
        tolerance: CPT_TOLERANCE,
        lenient: opts.lenient,
    };
    let (net, _) = load_network(path, &parse_opts)?;
    let spec = find_node(&net, node, opts.min_parents)?;
    let full = cpt_to_tensor(spec, &net)?;
    let (tensor, _) = squeeze_cpt(&full, &spec.parents);
    let profile = rank_profile(&tensor, &opts.analysis)?.with_source(ProfileSource::NetworkCpt {
        network: net.name().to_string(),
        node: node.to_string(),
    });
    let control = match opts.control {
        Some(mode) => {
            let seed = control_seed(opts.analysis.solver.seed, net.name(), node);
            let table = random_table_like(full.dims(), seed, mode)?;
            let (table, _) = squeeze_cpt(&table, &spec.parents);
            Some(rank_profile(&table, &opts.analysis)?.with_source(ProfileSource::RandomControl { seed }))
        }
        None => None,
    };
    Ok(ProfileOutcome {
        network: net.name().to_string(),
        node: node.to_string(),
        dims: full.dims().to_vec(),
        profile,
        control,
    })
}

/// `rank,max_error,control_max_error`.
pub fn write_profile_csv<W: Write>(outcome: &ProfileOutcome, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "max_error", "control_max_error"])?;
    for entry in &outcome.profile.entries {
        let control = outcome.control.as_ref().and_then(|c| c.max_error(entry.rank));
        w.write_record([entry.rank.to_string(), fmt_opt(entry.max_error), fmt_opt(control)])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Multi-start fit of one CPT at a fixed rank, on the unsqueezed CPT dims.
pub fn decompose_node(path: &Path, node: &str, rank: usize, solver: &SolverConfig) -> Result<(Vec<usize>, FitResult)> {
    let parse_opts = ParseOptions {
        tolerance: CPT_TOLERANCE,
        lenient: true,
    };
    let (net, _) = load_network(path, &parse_opts)?;
    let spec = find_node(&net, node, 0)?;
    let tensor = cpt_to_tensor(spec, &net)?;
    let fit = multi_start_decompose(&tensor, rank, solver)?;
    Ok((tensor.dims().to_vec(), fit))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(minimal: MinimalRank, ranks: usize, control: bool) -> CptRecord {
        CptRecord {
            network: "n".into(),
            node: "x".into(),
            dims: vec![2, 2, 2, 2],
            squeezed_parents: vec![],
            source: if control {
                RecordSource::Control { seed: 1 }
            } else {
                RecordSource::Cpt
            },
            minimal_rank: minimal,
            ranks: (1..=ranks)
                .map(|rank| RankEntry {
                    rank,
                    max_error: Some(0.5 / rank as f64),
                    frob_error: Some(1.0 / rank as f64),
                    iterations: 3,
                    converged: true,
                    start_kind: None,
                })
                .collect(),
            general_params: 8,
            cp_params: minimal.rank().map(|r| cp_param_count_general(&[2, 2, 2, 2], r)),
            diagnostics: vec![],
        }
    }

    fn report(records: Vec<CptRecord>, r_max: usize) -> CorpusReport {
        let curve = percentage_curve(records.iter().filter(|r| !r.source.is_control()), r_max);
        let control_curve = percentage_curve(records.iter().filter(|r| r.source.is_control()), r_max);
        CorpusReport {
            records,
            curve,
            control_curve,
            file_errors: vec![],
            warnings: vec![],
            config: AnalysisConfig {
                r_max,
                ..Default::default()
            },
            min_parents: 3,
            with_controls: true,
            control_mode: ControlMode::Normalized,
            seed: 42,
        }
    }

    #[test]
    fn empty_report_csv_is_header_only() {
        let mut buf = Vec::new();
        write_records_csv(&report(vec![], 3), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", RECORD_COLUMNS.join(",")));
    }

    #[test]
    fn one_row_per_rank() {
        let rep = report(vec![record(MinimalRank::ExceedsMax, 3, false)], 3);
        let mut buf = Vec::new();
        write_records_csv(&rep, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "n,x,2x2x2x2,1,0.5,1,>3,8,,cpt");
    }

    #[test]
    fn curve_is_monotone_and_bounded() {
        let recs = vec![
            record(MinimalRank::Rank(1), 1, false),
            record(MinimalRank::Rank(3), 3, false),
            record(MinimalRank::ExceedsMax, 4, false),
            record(MinimalRank::Rank(2), 2, true),
        ];
        let rep = report(recs, 4);
        let pct: Vec<f64> = rep.curve.iter().map(|p| p.percentage).collect();
        assert_eq!(pct.len(), 4);
        assert!((pct[0] - 100.0 / 3.0).abs() < 1e-12);
        assert!(pct.windows(2).all(|w| w[0] <= w[1]));
        assert!(pct.iter().all(|p| (0.0..=100.0).contains(p)));
        assert_eq!(rep.control_percentage_at(2), Some(100.0));

        let mut buf = Vec::new();
        write_curve_csv(&rep, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("rank,percentage,control_percentage\n1,"));
    }

    #[test]
    fn json_round_trip() {
        let rep = report(
            vec![record(MinimalRank::Rank(2), 2, false), record(MinimalRank::ExceedsMax, 5, true)],
            5,
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        emit_report(&rep, ReportFormat::Json, &path).unwrap();
        assert_eq!(load_report_json(&path).unwrap(), rep);
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let rep = report(vec![], 2);
        let bad = Path::new("/nonexistent-dir/report.csv");
        match emit_report(&rep, ReportFormat::Csv, bad) {
            Err(Error::Io { path, .. }) => assert_eq!(path, bad),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn control_seeds_are_stable_and_distinct() {
        assert_eq!(control_seed(42, "alarm", "PRESS"), control_seed(42, "alarm", "PRESS"));
        assert_ne!(control_seed(42, "alarm", "PRESS"), control_seed(42, "alarm", "VENTLUNG"));
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
