//! A noisy-or table has CP rank 2 no matter how many parents it has.
//!
//! cargo run --release --example noisy_or_rank

use cptrank::analysis::{cp_param_count, general_param_count, minimal_rank, noisy_or_cpt, AnalysisConfig};

fn main() -> cptrank::Result<()> {
    let cfg = AnalysisConfig {
        epsilon: 1e-6,
        r_max: 4,
        ..Default::default()
    };
    println!("parents  minimal_rank  table_params  cp_params");
    for parents in 2..=6 {
        let inhibitors: Vec<f64> = (0..parents).map(|i| 0.1 + 0.1 * i as f64).collect();
        let cpt = noisy_or_cpt(&inhibitors, 0.01)?;
        let rank = minimal_rank(&cpt, &cfg)?;
        let k = parents + 1;
        let cp = rank.rank().map_or("-".to_string(), |r| cp_param_count(k, r).to_string());
        println!("{parents:>7}  {:>12}  {:>12}  {cp:>9}", rank.to_string(), general_param_count(cpt.dims()));
    }
    Ok(())
}
