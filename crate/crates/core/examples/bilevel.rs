//! Joint choice of relevance vector and allocation, compared with the plan
//! built from the minimum-L1 relevance vector.
//!
//! cargo run --release --example bilevel

use amtrl::allocation::{allocate_fixed_nu, bilevel_oracle, nu_tilde_objective};
use amtrl::relevance;
use amtrl::rng::{gaussian_matrix, gaussian_vector, stream};

fn main() -> amtrl::Result<()> {
    let mut rng = stream(11, 0, 1);
    let w_mat = gaussian_matrix(&mut rng, 2, 8);
    let w = gaussian_vector(&mut rng, 2);
    let nu1 = relevance::l1_oracle_lp(&w_mat, &w)?.nu;
    for n_tot in [1_000, 100_000, 10_000_000] {
        let joint = bilevel_oracle(&w_mat, &w, n_tot, 1)?;
        let plan = allocate_fixed_nu(&nu1, n_tot, 1)?;
        let at_l1 = nu_tilde_objective(&nu1, &plan.continuous)?;
        println!(
            "N = {n_tot:>8}: joint {:.6e}, min-L1 plan {:.6e}, relative gap {:.1e}, |nu - nu1|_1 = {:.1e}",
            joint.objective,
            at_l1,
            (at_l1 - joint.objective) / at_l1,
            (&joint.nu - &nu1).lp_norm(1)
        );
    }
    Ok(())
}
