//! Fit CP models of increasing rank to a synthetic rank-3 tensor and compare
//! the two solvers.
//!
//! cargo run --release --example decompose_tensor

use cptrank::decomp::{als_decompose, lm_decompose, multi_start_decompose, random_init};
use cptrank::SolverConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> cptrank::Result<()> {
    let dims = [3, 4, 2, 3];
    let truth = random_init(&dims, 3, &mut ChaCha8Rng::seed_from_u64(7));
    let target = truth.reconstruct();
    let config = SolverConfig::default();

    println!("rank  max_error     frob_error    start");
    for rank in 1..=4 {
        let fit = multi_start_decompose(&target, rank, &config)?;
        println!("{rank:>4}  {:<12.3e}  {:<12.3e}  {}", fit.max_error, fit.frob_error, fit.start_kind);
    }

    // same start, both solvers
    let init = random_init(&dims, 3, &mut ChaCha8Rng::seed_from_u64(1));
    let als = als_decompose(&target, 3, &init, &SolverConfig { max_iters: 1000, ..config.clone() })?;
    let lm = lm_decompose(&target, 3, &init, &config)?;
    println!("\nALS: frob {:.3e} after {} sweeps", als.frob_error, als.iterations);
    println!("LM:  frob {:.3e} after {} iterations", lm.frob_error, lm.iterations);
    Ok(())
}
