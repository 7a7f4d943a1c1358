//! Rank analytics for a single table.
//!
//! A rank profile records, for every rank `1..=r_max`, the best max-entry and
//! Frobenius errors found by [`multi_start_decompose`]. The minimal rank is
//! the first rank whose best max error is below `epsilon`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomp::{default_starts, multi_start_from, warm_start_init, FitResult, SolverConfig, StartKind};
use crate::error::{Error, Result};
use crate::tensor::{CpModel, Tensor};

/// Slack allowed before a rise in best max error between consecutive ranks
/// is reported as a diagnostic.
pub const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub epsilon: f64,
    pub r_max: usize,
    pub solver: SolverConfig,
    /// Start rank `r + 1` from the rank-`r` solution plus one column, in
    /// addition to the solver's own starts.
    #[serde(default)]
    pub warm_start: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            epsilon: 1e-3,
            r_max: 20,
            solver: SolverConfig::default(),
            warm_start: false,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if self.r_max == 0 {
            return Err(Error::InvalidConfig("r_max must be at least 1".into()));
        }
        self.solver.validate()
    }
}

/// Smallest rank meeting the error threshold, or the sentinel when no rank up
/// to `r_max` does. The sentinel orders above every rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimalRank {
    Rank(usize),
    ExceedsMax,
}

impl MinimalRank {
    pub fn rank(self) -> Option<usize> {
        match self {
            MinimalRank::Rank(r) => Some(r),
            MinimalRank::ExceedsMax => None,
        }
    }

    pub fn at_most(self, r: usize) -> bool {
        matches!(self, MinimalRank::Rank(m) if m <= r)
    }
}

impl fmt::Display for MinimalRank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MinimalRank::Rank(r) => write!(f, "{r}"),
            MinimalRank::ExceedsMax => f.write_str("none"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    NetworkCpt { network: String, node: String },
    RandomControl { seed: u64 },
    Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    /// `None` when every start aborted at this rank.
    pub max_error: Option<f64>,
    pub frob_error: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub start_kind: Option<StartKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankProfile {
    pub dims: Vec<usize>,
    pub entries: Vec<RankEntry>,
    pub source: ProfileSource,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

impl RankProfile {
    pub fn entry(&self, rank: usize) -> Option<&RankEntry> {
        rank.checked_sub(1).and_then(|i| self.entries.get(i))
    }

    pub fn max_error(&self, rank: usize) -> Option<f64> {
        self.entry(rank).and_then(|e| e.max_error)
    }

    /// First rank in the profile with max error below `epsilon`.
    pub fn minimal_rank(&self, epsilon: f64) -> MinimalRank {
        self.entries
            .iter()
            .find(|e| e.max_error.is_some_and(|m| m < epsilon))
            .map_or(MinimalRank::ExceedsMax, |e| MinimalRank::Rank(e.rank))
    }

    pub fn with_source(mut self, source: ProfileSource) -> Self {
        self.source = source;
        self
    }
}

fn rank_seed(seed: u64, rank: usize) -> u64 {
    seed.wrapping_add((rank as u64) << 32)
}

fn sweep(target: &Tensor, cfg: &AnalysisConfig, stop_below_epsilon: bool) -> Result<RankProfile> {
    cfg.validate()?;
    if cfg.solver.start_count() == 0 {
        return Err(Error::InvalidConfig("no starting points configured".into()));
    }
    let mut entries = Vec::with_capacity(cfg.r_max);
    let mut diagnostics = Vec::new();
    let mut previous: Option<FitResult> = None;

    for rank in 1..=cfg.r_max {
        let solver = SolverConfig {
            seed: rank_seed(cfg.solver.seed, rank),
            ..cfg.solver.clone()
        };
        let mut starts = default_starts(target, rank, &solver);
        let carried: Option<CpModel> = match (&previous, cfg.warm_start) {
            (Some(prev), true) => {
                let warm = warm_start_init(&prev.model, solver.seed);
                starts.push((StartKind::Warm, warm.clone()));
                Some(warm)
            }
            _ => None,
        };
        let outcome = multi_start_from(target, &solver, starts);

        let fit = match (outcome, carried, &previous) {
            (Ok(fit), Some(warm), Some(prev)) if prev.max_error < fit.max_error => {
                // the padded previous model is itself a rank-r candidate
                Some(FitResult {
                    model: warm,
                    start_kind: StartKind::Warm,
                    iterations: 0,
                    ..prev.clone()
                })
            }
            (Ok(fit), _, _) => Some(fit),
            (Err(e), _, _) => {
                diagnostics.push(format!("rank {rank}: every start aborted ({e})"));
                None
            }
        };

        let entry = match &fit {
            Some(f) => RankEntry {
                rank,
                max_error: Some(f.max_error),
                frob_error: Some(f.frob_error),
                iterations: f.iterations,
                converged: f.converged,
                start_kind: Some(f.start_kind),
            },
            None => RankEntry {
                rank,
                max_error: None,
                frob_error: None,
                iterations: 0,
                converged: false,
                start_kind: None,
            },
        };
        if let (Some(prev), Some(cur)) = (&previous, &fit) {
            if cur.max_error > prev.max_error + MONOTONE_SLACK {
                diagnostics.push(format!(
                    "rank {rank}: best max error {} exceeds rank {} value {}",
                    cur.max_error,
                    rank - 1,
                    prev.max_error
                ));
            }
        }
        log::debug!("dims {:?} rank {rank}: max error {:?}", target.dims(), entry.max_error);
        let done = stop_below_epsilon && entry.max_error.is_some_and(|m| m < cfg.epsilon);
        entries.push(entry);
        if fit.is_some() {
            previous = fit;
        }
        if done {
            break;
        }
    }
    Ok(RankProfile {
        dims: target.dims().to_vec(),
        entries,
        source: ProfileSource::Tensor,
        diagnostics,
    })
}

/// Best errors for every rank `1..=r_max`.
pub fn rank_profile(target: &Tensor, cfg: &AnalysisConfig) -> Result<RankProfile> {
    sweep(target, cfg, false)
}

/// Linear sweep from rank 1 that stops at the first rank below `epsilon`.
/// The returned profile covers the ranks actually tried.
pub fn minimal_rank_profile(target: &Tensor, cfg: &AnalysisConfig) -> Result<(MinimalRank, RankProfile)> {
    let profile = sweep(target, cfg, true)?;
    Ok((profile.minimal_rank(cfg.epsilon), profile))
}

pub fn minimal_rank(target: &Tensor, cfg: &AnalysisConfig) -> Result<MinimalRank> {
    minimal_rank_profile(target, cfg).map(|(m, _)| m)
}

/// Free parameters of a general CPT with dims `[parents…, child]`:
/// `(n_child − 1) · ∏ n_parent`.
pub fn general_param_count(dims: &[usize]) -> u64 {
    match dims.split_last() {
        Some((&child, parents)) => {
            (child as u64).saturating_sub(1) * parents.iter().map(|&n| n as u64).product::<u64>()
        }
        None => 0,
    }
}

/// Parameters of a rank-`r` CP form of an order-`k` all-binary table:
/// `k(r − 1) + r`.
pub fn cp_param_count(k: usize, r: usize) -> u64 {
    (k as u64) * (r as u64).saturating_sub(1) + r as u64
}

/// Generalization of [`cp_param_count`] to arbitrary dims:
/// `(Σ_j (n_j − 1)) · (r − 1) + r`. Equals `k(r − 1) + r` when all `n_j = 2`.
pub fn cp_param_count_general(dims: &[usize], r: usize) -> u64 {
    let free: u64 = dims.iter().map(|&n| (n as u64).saturating_sub(1)).sum();
    free * (r as u64).saturating_sub(1) + r as u64
}

/// How random control tables are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// Uniform entries, each child column rescaled to sum to one.
    #[default]
    Normalized,
    /// Uniform entries on `[0, 1]`, unnormalized.
    Raw,
}

impl FromStr for ControlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(ControlMode::Normalized),
            "raw" => Ok(ControlMode::Raw),
            other => Err(Error::InvalidConfig(format!("unknown control mode `{other}`"))),
        }
    }
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlMode::Normalized => "normalized",
            ControlMode::Raw => "raw",
        })
    }
}

/// A random table with the given dims (child last).
pub fn random_table_like(dims: &[usize], seed: u64, mode: ControlMode) -> Result<Tensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len: usize = dims.iter().product();
    let mut data: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
    if mode == ControlMode::Normalized {
        let child = *dims.last().ok_or_else(|| Error::structural("empty dims"))?;
        for column in data.chunks_mut(child.max(1)) {
            let s: f64 = column.iter().sum();
            column.iter_mut().for_each(|x| *x /= s);
        }
    }
    Tensor::from_flat(dims.to_vec(), data)
}

/// A valid random CPT of the given dims (child last).
pub fn random_cpt_like(dims: &[usize], seed: u64) -> Result<Tensor> {
    random_table_like(dims, seed, ControlMode::Normalized)
}

/// Noisy-or CPT for a binary child with binary parents, by enumeration.
///
/// State 0 is "absent", state 1 "present". With inhibitor probabilities
/// `q_i` and leak `l`, `P(child absent | x) = (1 − l) · ∏_{i: x_i present} q_i`.
pub fn noisy_or_cpt(inhibitors: &[f64], leak: f64) -> Result<Tensor> {
    let m = inhibitors.len();
    let mut dims = vec![2; m + 1];
    dims[m] = 2;
    let mut data = Vec::with_capacity(1 << (m + 1));
    for config in 0..(1usize << m) {
        let mut absent = 1.0 - leak;
        for (i, q) in inhibitors.iter().enumerate() {
            // first parent is the most significant bit
            if config >> (m - 1 - i) & 1 == 1 {
                absent *= q;
            }
        }
        data.push(absent);
        data.push(1.0 - absent);
    }
    Tensor::from_flat(dims, data)
}
