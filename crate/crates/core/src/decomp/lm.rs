use nalgebra::{DMatrix, DVector};

use super::{check_init, FitResult, SolverConfig, StartKind, LM_DAMPING_MAX};
use crate::error::{Error, Result};
use crate::tensor::{CpModel, Odometer, Tensor};

/// Smallest damping the schedule shrinks to. `JᵀJ` of a CP model is always
/// singular (per-term scaling), so the system needs some diagonal shift.
const LM_DAMPING_MIN: f64 = 1e-12;

/// The least-squares CP objective `f(θ) = ½‖reconstruct(θ) − target‖²_F`
/// over the stacked factor entries `θ`.
///
/// Stacking order: factor 0 first, each factor row-major (`n_j × rank`), so
/// entry `(i, t)` of factor `j` sits at `offset_j + i·rank + t`.
#[derive(Debug)]
pub struct CpObjective<'a> {
    target: &'a Tensor,
    rank: usize,
    offsets: Vec<usize>,
    /// Multi-index of every entry, `order` values per entry.
    indices: Vec<usize>,
}

impl<'a> CpObjective<'a> {
    pub fn new(target: &'a Tensor, rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        let dims = target.dims();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut off = 0;
        for &n in dims {
            offsets.push(off);
            off += n * rank;
        }
        let mut indices = Vec::with_capacity(target.len() * dims.len());
        let mut odo = Odometer::new(dims);
        for _ in 0..target.len() {
            indices.extend_from_slice(odo.index());
            odo.advance();
        }
        Ok(CpObjective {
            target,
            rank,
            offsets,
            indices,
        })
    }

    pub fn n_params(&self) -> usize {
        self.target.dims().iter().sum::<usize>() * self.rank
    }

    /// Stacked parameters of `model`, weights folded into factor 0.
    pub fn pack(&self, model: &CpModel) -> Vec<f64> {
        let model = model.with_weights_absorbed();
        let mut theta = Vec::with_capacity(self.n_params());
        for f in model.factors() {
            for i in 0..f.nrows() {
                for t in 0..f.ncols() {
                    theta.push(f[(i, t)]);
                }
            }
        }
        theta
    }

    pub fn unpack(&self, theta: &[f64]) -> CpModel {
        let factors = self
            .target
            .dims()
            .iter()
            .zip(&self.offsets)
            .map(|(&n, &off)| DMatrix::from_row_slice(n, self.rank, &theta[off..off + n * self.rank]))
            .collect();
        CpModel::from_factors(factors).expect("stacked parameters have model shape")
    }

    fn entry_index(&self, e: usize) -> &[usize] {
        let k = self.offsets.len();
        &self.indices[e * k..(e + 1) * k]
    }

    /// `reconstruct(θ) − target`.
    pub fn residual(&self, theta: &[f64]) -> Vec<f64> {
        let r = self.rank;
        let target = self.target.data();
        (0..target.len())
            .map(|e| {
                let idx = self.entry_index(e);
                let mut sum = 0.0;
                for t in 0..r {
                    let mut p = 1.0;
                    for (j, &i) in idx.iter().enumerate() {
                        p *= theta[self.offsets[j] + i * r + t];
                    }
                    sum += p;
                }
                sum - target[e]
            })
            .collect()
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        0.5 * self.residual(theta).iter().map(|x| x * x).sum::<f64>()
    }

    /// Nonzero columns and values of Jacobian row `e`, written into the
    /// buffers. Columns come out in increasing order.
    fn jacobian_row(&self, theta: &[f64], e: usize, cols: &mut [usize], vals: &mut [f64], prefix: &mut [f64]) {
        let r = self.rank;
        let idx = self.entry_index(e);
        let k = idx.len();
        for t in 0..r {
            // prefix[j] = ∏_{l<j} a_l, then sweep back with a running suffix
            let mut acc = 1.0;
            for j in 0..k {
                prefix[j] = acc;
                acc *= theta[self.offsets[j] + idx[j] * r + t];
            }
            let mut suffix = 1.0;
            for j in (0..k).rev() {
                let col = self.offsets[j] + idx[j] * r + t;
                cols[j * r + t] = col;
                vals[j * r + t] = prefix[j] * suffix;
                suffix *= theta[col];
            }
        }
    }

    /// Gradient `Jᵀ·residual`.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let res = self.residual(theta);
        let (_, g) = self.normal_equations_impl(theta, &res, false);
        g.iter().copied().collect()
    }

    /// `(JᵀJ, Jᵀ·residual)`.
    pub fn normal_equations(&self, theta: &[f64], residual: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        self.normal_equations_impl(theta, residual, true)
    }

    fn normal_equations_impl(&self, theta: &[f64], residual: &[f64], with_jtj: bool) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.n_params();
        let k = self.offsets.len();
        let nnz = k * self.rank;
        let mut cols = vec![0usize; nnz];
        let mut vals = vec![0.0; nnz];
        let mut prefix = vec![0.0; k];
        let mut g = vec![0.0; p];
        for (e, &res) in residual.iter().enumerate() {
            self.jacobian_row(theta, e, &mut cols, &mut vals, &mut prefix);
            for a in 0..nnz {
                g[cols[a]] += vals[a] * res;
            }
        }
        let jtj = if with_jtj {
            self.gauss_newton_matrix(theta)
        } else {
            DMatrix::zeros(0, 0)
        };
        (jtj, DVector::from_vec(g))
    }

    /// `JᵀJ` from factor Gram matrices `Γ_m = A_mᵀA_m`. With `H` the Hadamard
    /// product of the Grams of the modes not involved:
    /// block `(j, j)` is `δ_{ii'}·H[t, t']` and block `(j, l)` is
    /// `A_j[i, t']·A_l[i', t]·H[t, t']`.
    fn gauss_newton_matrix(&self, theta: &[f64]) -> DMatrix<f64> {
        let r = self.rank;
        let dims = self.target.dims();
        let k = dims.len();
        let p = self.n_params();
        let a = |j: usize, i: usize, t: usize| theta[self.offsets[j] + i * r + t];
        let grams: Vec<DMatrix<f64>> = (0..k)
            .map(|j| DMatrix::from_fn(r, r, |t, u| (0..dims[j]).map(|i| a(j, i, t) * a(j, i, u)).sum()))
            .collect();
        let hadamard_except = |skip: &[usize]| {
            let mut h = DMatrix::from_element(r, r, 1.0);
            for (m, gm) in grams.iter().enumerate() {
                if !skip.contains(&m) {
                    h.component_mul_assign(gm);
                }
            }
            h
        };

        let mut jtj = DMatrix::zeros(p, p);
        for j in 0..k {
            let h = hadamard_except(&[j]);
            for i in 0..dims[j] {
                let base = self.offsets[j] + i * r;
                for t in 0..r {
                    for u in 0..r {
                        jtj[(base + t, base + u)] = h[(t, u)];
                    }
                }
            }
            for l in j + 1..k {
                let h = hadamard_except(&[j, l]);
                for i in 0..dims[j] {
                    let row = self.offsets[j] + i * r;
                    for i2 in 0..dims[l] {
                        let col = self.offsets[l] + i2 * r;
                        for t in 0..r {
                            for u in 0..r {
                                let v = a(j, i, u) * a(l, i2, t) * h[(t, u)];
                                jtj[(row + t, col + u)] = v;
                                jtj[(col + u, row + t)] = v;
                            }
                        }
                    }
                }
            }
        }
        jtj
    }
}

/// Levenberg-Marquardt on the stacked factor entries.
///
/// Each iteration forms `JᵀJ` and `Jᵀres` once, then solves
/// `(JᵀJ + λI)δ = −Jᵀres`, growing `λ` until a step lowers `f` (or `λ`
/// passes [`LM_DAMPING_MAX`], which ends the run with `converged = false`).
/// Accepted steps shrink `λ`. The run also stops when the Frobenius error is
/// under `abs_fit_tol`, when its relative decrease is under `rel_fit_tol`,
/// or after `max_iters` iterations.
pub fn lm_decompose(target: &Tensor, rank: usize, init: &CpModel, config: &SolverConfig) -> Result<FitResult> {
    config.validate()?;
    check_init(target, rank, init)?;
    let objective = CpObjective::new(target, rank)?;
    let p = objective.n_params();

    let mut theta = objective.pack(init);
    let mut residual = objective.residual(&theta);
    let mut f = 0.5 * residual.iter().map(|x| x * x).sum::<f64>();
    if !f.is_finite() {
        return Err(Error::NonFinite(format!(
            "initial residual for rank {rank} on dims {:?}",
            target.dims()
        )));
    }

    let mut lambda = config.lm_damping_init;
    let mut iterations = 0;
    let mut converged = (2.0 * f).sqrt() <= config.abs_fit_tol;

    while !converged && iterations < config.max_iters {
        iterations += 1;
        let (jtj, g) = objective.normal_equations(&theta, &residual);
        let mut accepted = false;
        while lambda <= LM_DAMPING_MAX {
            let mut a = jtj.clone();
            for i in 0..p {
                a[(i, i)] += lambda;
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= config.lm_damping_grow;
                    continue;
                }
            };
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            let trial_res = objective.residual(&trial);
            let trial_f = 0.5 * trial_res.iter().map(|x| x * x).sum::<f64>();
            if trial_f.is_finite() && trial_f < f {
                let old_frob = (2.0 * f).sqrt();
                let new_frob = (2.0 * trial_f).sqrt();
                theta = trial;
                residual = trial_res;
                f = trial_f;
                lambda = (lambda * config.lm_damping_shrink).max(LM_DAMPING_MIN);
                accepted = true;
                if new_frob <= config.abs_fit_tol || (old_frob - new_frob) / old_frob < config.rel_fit_tol {
                    converged = true;
                }
                break;
            }
            lambda *= config.lm_damping_grow;
        }
        if !accepted {
            log::trace!("LM damping overflow after {iterations} iterations");
            break;
        }
    }

    FitResult::evaluate(target, objective.unpack(&theta), iterations, converged, StartKind::Given)
}
