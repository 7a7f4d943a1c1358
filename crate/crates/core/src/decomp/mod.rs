//! CP decomposition solvers.
//!
//! [`lm_decompose`] is the main engine: Levenberg-Marquardt on the stacked
//! factor entries, minimizing `½‖reconstruct(θ) − target‖²`. [`als_decompose`]
//! is a simple alternating least squares reference. [`multi_start_decompose`]
//! runs LM from several random starts plus the `nvec` start and keeps the fit
//! with the smallest max-entry error.

mod als;
mod init;
mod lm;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{CpModel, Tensor};

pub use als::{als_decompose, als_sweep};
pub use init::{nvec_init, random_init, warm_start_init};
pub use lm::{lm_decompose, CpObjective};

/// Damping above this value without an accepted step ends an LM run.
pub const LM_DAMPING_MAX: f64 = 1e12;

/// Relative cutoff on singular values when ALS pseudo-inverts its Gram matrix.
pub const PINV_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop when the relative decrease of the Frobenius error falls below this.
    pub rel_fit_tol: f64,
    /// Stop when the Frobenius error falls below this.
    pub abs_fit_tol: f64,
    pub lm_damping_init: f64,
    pub lm_damping_grow: f64,
    pub lm_damping_shrink: f64,
    pub n_random_starts: usize,
    pub use_nvec_start: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 200,
            rel_fit_tol: 1e-10,
            abs_fit_tol: 1e-12,
            lm_damping_init: 1e-2,
            lm_damping_grow: 10.0,
            lm_damping_shrink: 0.1,
            n_random_starts: 10,
            use_nvec_start: true,
            seed: 42,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.max_iters == 0 {
            return fail("max_iters must be at least 1");
        }
        if !(self.rel_fit_tol >= 0.0 && self.abs_fit_tol >= 0.0) {
            return fail("tolerances must be nonnegative");
        }
        if !(self.lm_damping_init > 0.0) {
            return fail("lm_damping_init must be positive");
        }
        if !(self.lm_damping_grow > 1.0) {
            return fail("lm_damping_grow must exceed 1");
        }
        if !(self.lm_damping_shrink > 0.0 && self.lm_damping_shrink < 1.0) {
            return fail("lm_damping_shrink must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn start_count(&self) -> usize {
        self.n_random_starts + usize::from(self.use_nvec_start)
    }
}

/// Where a fit started from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Random(usize),
    Nvec,
    /// Previous-rank solution plus one column.
    Warm,
    /// Caller-supplied model.
    Given,
}

impl std::fmt::Display for StartKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StartKind::Random(i) => write!(f, "random{i}"),
            StartKind::Nvec => f.write_str("nvec"),
            StartKind::Warm => f.write_str("warm"),
            StartKind::Given => f.write_str("given"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: CpModel,
    pub frob_error: f64,
    pub max_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub start_kind: StartKind,
}

impl FitResult {
    /// Errors are always recomputed from the model.
    pub(crate) fn evaluate(
        target: &Tensor,
        model: CpModel,
        iterations: usize,
        converged: bool,
        start_kind: StartKind,
    ) -> Result<Self> {
        let approx = model.reconstruct();
        Ok(FitResult {
            frob_error: approx.frobenius_dist(target)?,
            max_error: approx.max_abs_diff(target)?,
            model,
            iterations,
            converged,
            start_kind,
        })
    }
}

pub(crate) fn check_init(target: &Tensor, rank: usize, init: &CpModel) -> Result<()> {
    if init.dims() != target.dims() {
        return Err(Error::structural(format!(
            "initial model dims {:?} differ from target dims {:?}",
            init.dims(),
            target.dims()
        )));
    }
    if init.rank() != rank {
        return Err(Error::structural(format!(
            "initial model has rank {}, expected {rank}",
            init.rank()
        )));
    }
    Ok(())
}

/// The starting models of a multi-start run: random starts `0..n` seeded with
/// `seed + index`, then the `nvec` start.
pub fn default_starts(target: &Tensor, rank: usize, config: &SolverConfig) -> Vec<(StartKind, CpModel)> {
    let mut starts: Vec<(StartKind, CpModel)> = (0..config.n_random_starts)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(i as u64));
            (StartKind::Random(i), random_init(target.dims(), rank, &mut rng))
        })
        .collect();
    if config.use_nvec_start {
        starts.push((StartKind::Nvec, nvec_init(target, rank, config.seed)));
    }
    starts
}

/// Run LM from every configured start; keep the smallest max error, then the
/// smallest Frobenius error, then the earliest start.
pub fn multi_start_decompose(target: &Tensor, rank: usize, config: &SolverConfig) -> Result<FitResult> {
    config.validate()?;
    if rank == 0 {
        return Err(Error::InvalidConfig("rank must be at least 1".into()));
    }
    if config.start_count() == 0 {
        return Err(Error::InvalidConfig("no starting points configured".into()));
    }
    multi_start_from(target, config, default_starts(target, rank, config))
}

/// LM from each supplied start, selected as in [`multi_start_decompose`].
pub fn multi_start_from(
    target: &Tensor,
    config: &SolverConfig,
    starts: Vec<(StartKind, CpModel)>,
) -> Result<FitResult> {
    if starts.is_empty() {
        return Err(Error::InvalidConfig("no starting points configured".into()));
    }
    let results: Vec<Result<FitResult>> = starts
        .into_par_iter()
        .map(|(kind, init)| {
            let rank = init.rank();
            lm_decompose(target, rank, &init, config).map(|mut fit| {
                fit.start_kind = kind;
                fit
            })
        })
        .collect();
    select_best(results)
}

pub(crate) fn select_best(results: Vec<Result<FitResult>>) -> Result<FitResult> {
    let mut best: Option<FitResult> = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(fit) => {
                let better = match &best {
                    None => true,
                    Some(b) => fit
                        .max_error
                        .total_cmp(&b.max_error)
                        .then(fit.frob_error.total_cmp(&b.frob_error))
                        .is_lt(),
                };
                if better {
                    best = Some(fit);
                }
            }
            Err(e) => {
                log::debug!("start aborted: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::InvalidConfig("no starting points configured".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn random_target(dims: &[usize], r: usize, seed: u64) -> (CpModel, Tensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = CpModel::from_factors(
            dims.iter()
                .map(|&n| DMatrix::from_fn(n, r, |_, _| rng.random::<f64>()))
                .collect(),
        )
        .unwrap();
        let t = m.reconstruct();
        (m, t)
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = [
            SolverConfig { max_iters: 0, ..Default::default() },
            SolverConfig { rel_fit_tol: -1.0, ..Default::default() },
            SolverConfig { lm_damping_init: 0.0, ..Default::default() },
            SolverConfig { lm_damping_grow: 1.0, ..Default::default() },
            SolverConfig { lm_damping_shrink: 1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn multi_start_recovers_rank_two() {
        let (_, t) = random_target(&[2, 2, 2], 2, 1);
        let cfg = SolverConfig::default();
        let fit = multi_start_decompose(&t, 2, &cfg).unwrap();
        assert!(fit.max_error < 1e-6, "{}", fit.max_error);
    }

    #[test]
    fn single_nvec_start_equals_direct_lm() {
        let (_, t) = random_target(&[3, 2, 3], 2, 4);
        let cfg = SolverConfig {
            n_random_starts: 0,
            ..Default::default()
        };
        let multi = multi_start_decompose(&t, 2, &cfg).unwrap();
        let init = nvec_init(&t, 2, cfg.seed);
        let direct = lm_decompose(&t, 2, &init, &cfg).unwrap();
        assert_eq!(multi.model, direct.model);
        assert_eq!(multi.start_kind, StartKind::Nvec);
    }

    #[test]
    fn multi_start_is_deterministic() {
        let (_, t) = random_target(&[3, 3, 2], 3, 9);
        let cfg = SolverConfig {
            n_random_starts: 4,
            ..Default::default()
        };
        let a = multi_start_decompose(&t, 2, &cfg).unwrap();
        let b = multi_start_decompose(&t, 2, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_starts_is_a_config_error() {
        let (_, t) = random_target(&[2, 2], 1, 2);
        let cfg = SolverConfig {
            n_random_starts: 0,
            use_nvec_start: false,
            ..Default::default()
        };
        assert!(matches!(multi_start_decompose(&t, 1, &cfg), Err(Error::InvalidConfig(_))));
        assert!(multi_start_decompose(&t, 0, &SolverConfig::default()).is_err());
    }

    #[test]
    fn selection_prefers_max_error_then_frob_then_order() {
        let (m, t) = random_target(&[2, 2], 1, 3);
        let mk = |max_error, frob_error, k| {
            Ok(FitResult {
                model: m.clone(),
                frob_error,
                max_error,
                iterations: 0,
                converged: true,
                start_kind: StartKind::Random(k),
            })
        };
        let best = select_best(vec![mk(0.2, 0.1, 0), mk(0.1, 0.5, 1), mk(0.1, 0.4, 2), mk(0.1, 0.4, 3)]).unwrap();
        assert_eq!(best.start_kind, StartKind::Random(2));
        let _ = t;

        let only_err = select_best(vec![Err(Error::NonFinite("x".into()))]);
        assert!(matches!(only_err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn rescaled_model_reports_same_errors() {
        let (_, t) = random_target(&[3, 2, 2], 2, 12);
        let fit = multi_start_decompose(&t, 2, &SolverConfig::default()).unwrap();
        let mut factors = fit.model.factors().to_vec();
        factors[0].column_mut(1).scale_mut(4.0);
        factors[2].column_mut(1).scale_mut(0.25);
        let scaled = CpModel::from_factors(factors).unwrap();
        let again = FitResult::evaluate(&t, scaled, 0, true, StartKind::Given).unwrap();
        assert!((again.max_error - fit.max_error).abs() < 1e-12);
        assert!((again.frob_error - fit.frob_error).abs() < 1e-12);
    }
}
