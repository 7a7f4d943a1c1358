use nalgebra::DMatrix;

use super::{check_init, FitResult, SolverConfig, StartKind, PINV_RCOND};
use crate::error::Result;
use crate::tensor::{khatri_rao, CpModel, Tensor};

/// Moore-Penrose inverse of a symmetric Gram matrix, dropping singular
/// values below `PINV_RCOND` times the largest one.
fn pinv(gram: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = gram.clone().svd(true, true);
    let top = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    if top == 0.0 {
        return DMatrix::zeros(gram.ncols(), gram.nrows());
    }
    svd.pseudo_inverse(top * PINV_RCOND)
        .expect("SVD computed with both factors")
}

/// One ALS sweep: every factor in turn is set to
/// `unfold(target, m) · KR_m · pinv(Gram_m)`, where `KR_m` is the Khatri-Rao
/// product of the other factors and `Gram_m` the Hadamard product of their
/// Gram matrices. Weights are absorbed first.
pub fn als_sweep(target: &Tensor, model: &CpModel) -> Result<CpModel> {
    let unfoldings: Vec<DMatrix<f64>> = (0..target.order()).map(|m| target.unfold(m)).collect::<Result<_>>()?;
    let mut factors = model.with_weights_absorbed().factors().to_vec();
    sweep(&unfoldings, &mut factors, model.rank())?;
    CpModel::from_factors(factors)
}

fn sweep(unfoldings: &[DMatrix<f64>], factors: &mut [DMatrix<f64>], rank: usize) -> Result<()> {
    let k = factors.len();
    for m in 0..k {
        let others: Vec<&DMatrix<f64>> = (0..k).filter(|&j| j != m).map(|j| &factors[j]).collect();
        let update = if others.is_empty() {
            // order-1 target: the first column carries the whole vector
            let mut u = DMatrix::zeros(unfoldings[0].nrows(), rank);
            u.set_column(0, &unfoldings[0].column(0));
            u
        } else {
            let mut gram = DMatrix::from_element(rank, rank, 1.0);
            for f in &others {
                gram.component_mul_assign(&(f.transpose() * *f));
            }
            &unfoldings[m] * khatri_rao(&others)? * pinv(&gram)
        };
        factors[m] = update;
    }
    Ok(())
}

/// Alternating least squares from `init`, repeating [`als_sweep`] until a
/// stopping rule fires. Returns the best iterate seen.
pub fn als_decompose(target: &Tensor, rank: usize, init: &CpModel, config: &SolverConfig) -> Result<FitResult> {
    config.validate()?;
    check_init(target, rank, init)?;
    let unfoldings: Vec<DMatrix<f64>> = (0..target.order()).map(|m| target.unfold(m)).collect::<Result<_>>()?;

    let mut factors = init.with_weights_absorbed().factors().to_vec();
    let mut frob = init.reconstruct().frobenius_dist(target)?;
    let mut best = (frob, factors.clone());
    let mut iterations = 0;
    let mut converged = frob <= config.abs_fit_tol;

    while !converged && iterations < config.max_iters {
        iterations += 1;
        sweep(&unfoldings, &mut factors, rank)?;
        let model = CpModel::from_factors(factors.clone())?;
        let next = model.reconstruct().frobenius_dist(target)?;
        if next < best.0 {
            best = (next, factors.clone());
        }
        if next <= config.abs_fit_tol || (frob - next) / frob.max(f64::MIN_POSITIVE) < config.rel_fit_tol {
            converged = true;
        }
        frob = next;
    }

    let model = CpModel::from_factors(best.1)?;
    FitResult::evaluate(target, model, iterations, converged, StartKind::Given)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::random_init;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_target_gives_zero_error() {
        let t = Tensor::zeros(vec![2, 3, 2]).unwrap();
        let init = random_init(&[2, 3, 2], 2, &mut ChaCha8Rng::seed_from_u64(0));
        let fit = als_decompose(&t, 2, &init, &SolverConfig::default()).unwrap();
        assert_eq!(fit.frob_error, 0.0);
    }

    #[test]
    fn rank_one_fixed_point() {
        let v = vec![vec![0.2, 0.8], vec![0.5, 0.1, 0.4], vec![0.3, 0.7]];
        let t = Tensor::rank_one(&v).unwrap();
        let init = random_init(&[2, 3, 2], 1, &mut ChaCha8Rng::seed_from_u64(1));
        let fit = als_decompose(&t, 1, &init, &SolverConfig::default()).unwrap();
        assert!(fit.max_error < 1e-10, "{}", fit.max_error);
    }

    #[test]
    fn recovers_well_separated_rank_two() {
        // nonnegative random factors are nearly collinear and make ALS swamp
        let gen = CpModel::from_factors(vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, -0.3, 1.0]),
            DMatrix::from_row_slice(3, 2, &[0.5, 1.0, 1.0, -0.4, 0.2, 0.7]),
            DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 0.3, 1.0]),
        ])
        .unwrap();
        let t = gen.reconstruct();
        let cfg = SolverConfig {
            max_iters: 2000,
            ..Default::default()
        };
        let best = (0..5)
            .map(|s| {
                let init = random_init(&[2, 3, 2], 2, &mut ChaCha8Rng::seed_from_u64(100 + s));
                als_decompose(&t, 2, &init, &cfg).unwrap().frob_error
            })
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-8, "{best}");
    }

    #[test]
    fn vector_target_is_fit_in_one_sweep() {
        let t = Tensor::from_flat(vec![3], vec![0.2, 0.3, 0.5]).unwrap();
        let init = random_init(&[3], 2, &mut ChaCha8Rng::seed_from_u64(4));
        let next = als_sweep(&t, &init).unwrap();
        assert!(next.reconstruct().max_abs_diff(&t).unwrap() < 1e-15);
    }

    #[test]
    fn singular_gram_does_not_crash() {
        let t = Tensor::rank_one(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![0.5, 0.5]]).unwrap();
        // identical columns make every Gram matrix singular
        let col = DMatrix::from_element(2, 1, 1.0);
        let init = CpModel::from_factors(vec![
            DMatrix::from_fn(2, 2, |i, _| col[(i, 0)]),
            DMatrix::from_fn(2, 2, |i, _| col[(i, 0)]),
            DMatrix::from_fn(2, 2, |i, _| col[(i, 0)]),
        ])
        .unwrap();
        let fit = als_decompose(&t, 2, &init, &SolverConfig::default()).unwrap();
        assert!(fit.frob_error.is_finite());
    }
}
