use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::{CpModel, Tensor};

/// Factor entries drawn i.i.d. uniform on `[0, 1]`, mode by mode, each
/// factor filled row by row.
pub fn random_init<R: Rng + ?Sized>(dims: &[usize], rank: usize, rng: &mut R) -> CpModel {
    let factors = dims
        .iter()
        .map(|&n| {
            let flat: Vec<f64> = (0..n * rank).map(|_| rng.random::<f64>()).collect();
            DMatrix::from_row_slice(n, rank, &flat)
        })
        .collect();
    CpModel::from_factors(factors).expect("random_init needs rank >= 1 and nonzero dims")
}

/// Leading left singular vectors of every mode unfolding.
///
/// When a mode has fewer than `rank` nonzero singular values (in particular
/// when `n_j < rank`), the missing columns are random unit vectors drawn from
/// a generator seeded with `seed`. Each singular vector is signed so that its
/// largest-magnitude entry is positive.
pub fn nvec_init(target: &Tensor, rank: usize, seed: u64) -> CpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factors = Vec::with_capacity(target.order());
    for mode in 0..target.order() {
        let n = target.dims()[mode];
        let unfolded = target.unfold(mode).expect("mode in range");
        let gram = &unfolded * unfolded.transpose();
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let top = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
        let cutoff = top * 1e-20;
        let mut factor = DMatrix::zeros(n, rank);
        let mut filled = 0;
        for &idx in &order {
            if filled == rank {
                break;
            }
            let ev = eig.eigenvalues[idx];
            if !(ev > cutoff) || ev <= 0.0 {
                break;
            }
            let mut v = eig.eigenvectors.column(idx).clone_owned();
            let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if pivot < 0.0 {
                v.neg_mut();
            }
            factor.set_column(filled, &v);
            filled += 1;
        }
        for col in filled..rank {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            } else {
                v[0] = 1.0;
            }
            for (i, x) in v.into_iter().enumerate() {
                factor[(i, col)] = x;
            }
        }
        factors.push(factor);
    }
    CpModel::from_factors(factors).expect("nvec_init needs rank >= 1")
}

/// `previous` plus one extra term whose last-mode vector is zero, so the
/// starting reconstruction equals that of `previous`. The other vectors of
/// the new term are uniform on `[0, 1]`.
pub fn warm_start_init(previous: &CpModel, seed: u64) -> CpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = previous.with_weights_absorbed();
    let k = base.order();
    let vectors: Vec<Vec<f64>> = base
        .dims()
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            if j + 1 == k {
                vec![0.0; n]
            } else {
                (0..n).map(|_| rng.random::<f64>()).collect()
            }
        })
        .collect();
    base.with_term(&vectors, 1.0).expect("term vectors match model dims")
}
