//! Parameter counts of full binary tables against their rank-r CP forms.
//!
//! cargo run --example parameter_savings

use cptrank::analysis::{cp_param_count, cp_param_count_general, general_param_count};

fn main() {
    println!("binary child with k-1 binary parents");
    println!("  k  full      r=2  r=4");
    for k in [3, 5, 8, 10, 15, 20] {
        let dims = vec![2; k];
        println!(
            "{k:>3}  {:<8}  {:>3}  {:>3}",
            general_param_count(&dims),
            cp_param_count(k, 2),
            cp_param_count(k, 4)
        );
    }

    let dims = [3, 4, 3, 3];
    println!("\ndims {dims:?}: full {}", general_param_count(&dims));
    for r in [1, 2, 4, 6, 10] {
        println!("  rank {r:>2}: {}", cp_param_count_general(&dims, r));
    }
}
