//! Factorizes the rank-3 boundary matrix and prints the recovered
//! nonnegative factor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsmooth::cpfact::{cp_factorize, cp_solver_config, easy_boundary_instance};
use rsmooth::solver::SubAlgorithm;

fn main() {
    let inst = easy_boundary_instance();
    let cfg = cp_solver_config(SubAlgorithm::Cg);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let res = cp_factorize(&inst, Some(3), &cfg, &mut rng).expect("solve runs");
    println!(
        "success: {} (min entry {:.3e}, residual {:.3e}, {} outer / {} total iterations)",
        res.success,
        res.min_entry,
        res.residual,
        res.trace.outer_iters(),
        res.trace.total_iters()
    );
    println!("factor B with A = B B^T:");
    for i in 0..res.b.nrows() {
        let row: Vec<String> = (0..res.b.ncols())
            .map(|j| format!("{:8.4}", res.b[(i, j)]))
            .collect();
        println!("  {}", row.join(" "));
    }
}
