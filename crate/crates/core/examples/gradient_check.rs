//! Analytic gradient of the CP objective against central differences.
//!
//! cargo run --example gradient_check

use cptrank::decomp::{random_init, CpObjective};
use cptrank::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> cptrank::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dims = vec![2, 3, 4];
    let target = Tensor::from_flat(dims.clone(), (0..24).map(|_| rng.random()).collect())?;
    let model = random_init(&dims, 2, &mut rng);
    let obj = CpObjective::new(&target, 2)?;
    let theta = obj.pack(&model);
    let grad = obj.gradient(&theta);

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (i, g) in grad.iter().enumerate() {
        let mut plus = theta.clone();
        let mut minus = theta.clone();
        plus[i] += h;
        minus[i] -= h;
        let fd = (obj.value(&plus) - obj.value(&minus)) / (2.0 * h);
        worst = worst.max((g - fd).abs() / g.abs().max(1.0));
    }
    println!("{} parameters, worst relative gradient error {worst:.2e}", theta.len());
    Ok(())
}
