//! Relevance vectors for a target head: exact minimum-L1 (simplex),
//! Lasso along a decreasing penalty and the minimum-Euclidean-norm solution.
//!
//! cargo run --release --example relevance_solvers

use amtrl::relevance::{self, LassoOptions};
use amtrl::rng::{gaussian_matrix, gaussian_vector, stream};

fn main() -> amtrl::Result<()> {
    let mut rng = stream(3, 0, 1);
    let w_mat = gaussian_matrix(&mut rng, 3, 12);
    let w = gaussian_vector(&mut rng, 3);

    let l1 = relevance::l1_oracle_lp(&w_mat, &w)?;
    let l2 = relevance::min_l2_solution(&w_mat, &w)?;
    println!("min-L1: |nu|_1 = {:.4}, support {} of {}", l1.l1_norm(), l1.support_size, w_mat.ncols());
    println!("min-L2: |nu|_1 = {:.4}, support {}", l2.l1_norm(), l2.support_size);

    for lambda in [1e-1, 1e-3, 1e-8] {
        let fit = relevance::lasso(&w_mat, &w, lambda, &LassoOptions::default())?;
        println!(
            "lasso lambda {lambda:.0e}: support {}, |nu - nu_L1|_1 = {:.2e}, KKT residual {:.1e}",
            fit.support_size,
            (&fit.nu - &l1.nu).lp_norm(1),
            fit.kkt_residual
        );
    }

    let bounds = relevance::norm_bound_check(&w_mat, &w)?;
    println!(
        "|nu2|_2 = {:.3} <= |w|/sigma_min = {:.3}; |nu1|_1 = {:.3} vs sqrt(k)|w|/sigma_min = {:.3} (support bound {:.3})",
        bounds.nu2_l2, bounds.l2_bound, bounds.nu1_l1, bounds.l1_bound, bounds.l1_support_bound
    );
    Ok(())
}
