use cptrank::decomp::{lm_decompose, random_init, warm_start_init, CpObjective};
use cptrank::{khatri_rao, CpModel, SolverConfig, Tensor};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dims_strategy(max_order: usize, max_dim: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1..=max_dim, 1..=max_order)
}

fn tensor_strategy() -> impl Strategy<Value = Tensor> {
    dims_strategy(4, 4).prop_flat_map(|dims| {
        let len: usize = dims.iter().product();
        prop::collection::vec(-1.0f64..1.0, len).prop_map(move |data| Tensor::from_flat(dims.clone(), data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unfold_fold_round_trip(t in tensor_strategy(), mode_seed in 0usize..8) {
        let mode = mode_seed % t.order();
        let m = t.unfold(mode).unwrap();
        prop_assert_eq!(m.nrows(), t.dims()[mode]);
        prop_assert_eq!(m.nrows() * m.ncols(), t.len());
        let back = Tensor::fold(&m, mode, t.dims()).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn unfolded_reconstruction_is_factor_times_khatri_rao(
        dims in dims_strategy(4, 3),
        rank in 1usize..4,
        seed in any::<u64>(),
        mode_seed in 0usize..8,
    ) {
        let model = random_init(&dims, rank, &mut ChaCha8Rng::seed_from_u64(seed));
        let mode = mode_seed % dims.len();
        let unfolded = model.reconstruct().unfold(mode).unwrap();
        let others: Vec<&DMatrix<f64>> = (0..dims.len()).filter(|&j| j != mode).map(|j| model.factor(j)).collect();
        let expected = if others.is_empty() {
            model.factor(mode) * DMatrix::from_element(rank, 1, 1.0)
        } else {
            model.factor(mode) * khatri_rao(&others).unwrap().transpose()
        };
        prop_assert!((unfolded - expected).abs().max() < 1e-12);
    }

    #[test]
    fn reconstruction_is_multilinear(
        dims in dims_strategy(4, 3),
        rank in 1usize..4,
        seed in any::<u64>(),
        scale in -3.0f64..3.0,
        mode_seed in 0usize..8,
    ) {
        let model = random_init(&dims, rank, &mut ChaCha8Rng::seed_from_u64(seed));
        let mode = mode_seed % dims.len();
        let mut factors = model.factors().to_vec();
        factors[mode] *= scale;
        let scaled = CpModel::from_factors(factors).unwrap().reconstruct();
        let base = model.reconstruct();
        for (a, b) in scaled.data().iter().zip(base.data()) {
            prop_assert!((a - scale * b).abs() < 1e-12);
        }
    }

    #[test]
    fn distance_metrics(a in tensor_strategy(), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Tensor::from_flat(a.dims().to_vec(), (0..a.len()).map(|_| rng.random::<f64>()).collect()).unwrap();
        let max = a.max_abs_diff(&b).unwrap();
        let frob = a.frobenius_dist(&b).unwrap();
        prop_assert_eq!(a.max_abs_diff(&a).unwrap(), 0.0);
        prop_assert_eq!(max, b.max_abs_diff(&a).unwrap());
        prop_assert!(max <= frob + 1e-15);
        prop_assert!(frob <= max * (a.len() as f64).sqrt() + 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences(
        dims in dims_strategy(3, 4),
        rank in 1usize..4,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = dims.iter().product();
        let target = Tensor::from_flat(dims.clone(), (0..len).map(|_| rng.random::<f64>()).collect()).unwrap();
        let model = random_init(&dims, rank, &mut rng);
        let obj = CpObjective::new(&target, rank).unwrap();
        let theta = obj.pack(&model);
        let grad = obj.gradient(&theta);
        let h = 1e-6;
        for (i, g) in grad.iter().enumerate() {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (obj.value(&plus) - obj.value(&minus)) / (2.0 * h);
            prop_assert!((g - fd).abs() / g.abs().max(1.0) < 1e-4, "param {}: {} vs {}", i, g, fd);
        }
    }

    #[test]
    fn warm_start_keeps_reconstruction(dims in dims_strategy(4, 3), rank in 1usize..4, seed in any::<u64>()) {
        let model = random_init(&dims, rank, &mut ChaCha8Rng::seed_from_u64(seed));
        let warm = warm_start_init(&model, seed ^ 1);
        prop_assert_eq!(warm.rank(), rank + 1);
        prop_assert!(warm.reconstruct().max_abs_diff(&model.reconstruct()).unwrap() < 1e-12);
    }

    #[test]
    fn squeeze_keeps_entries(t in tensor_strategy()) {
        let (s, removed) = t.squeeze();
        prop_assert_eq!(s.data(), t.data());
        prop_assert!(s.order() >= 1);
        for m in removed {
            prop_assert_eq!(t.dims()[m], 1);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lm_never_worsens_its_start(t in tensor_strategy(), rank in 1usize..4, seed in any::<u64>()) {
        let init = random_init(t.dims(), rank, &mut ChaCha8Rng::seed_from_u64(seed));
        let start = init.reconstruct().frobenius_dist(&t).unwrap();
        let cfg = SolverConfig { max_iters: 30, ..Default::default() };
        let fit = lm_decompose(&t, rank, &init, &cfg).unwrap();
        prop_assert!(fit.frob_error <= start + 1e-12);
        prop_assert!(fit.max_error <= fit.frob_error + 1e-12);
    }
}
