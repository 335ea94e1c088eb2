//! Turning a relevance vector into per-task sample counts: the water-filling
//! rule for several exponents against the uniform split.
//!
//! cargo run --release --example allocation_rules

use amtrl::allocation::{allocate_fixed_nu, lpnq_allocation, nu_tilde_objective, passive_allocation};
use amtrl::instance::almost_sparse_nu;

fn main() -> amtrl::Result<()> {
    let nu = almost_sparse_nu(10)?;
    let (n_tot, floor) = (5000, 50);
    let l1 = allocate_fixed_nu(&nu, n_tot, floor)?;
    let l2 = lpnq_allocation(&nu, 2.0, n_tot, floor)?;
    let uniform = passive_allocation(nu.len(), n_tot, floor)?;
    for (name, a) in [("|nu|", &l1), ("|nu|^2", &l2), ("uniform", &uniform)] {
        println!("{name:>8}: {:?}  sum nu^2/n = {:.3e}", a.n, nu_tilde_objective(&nu, &a.counts_f64())?);
    }
    let l1_norm: f64 = nu.iter().map(|v| v.abs()).sum();
    let free = allocate_fixed_nu(&nu, n_tot, 0)?;
    println!(
        "no floor: objective {:.6e} = |nu|_1^2 / N = {:.6e}",
        nu_tilde_objective(&nu, &free.continuous)?,
        l1_norm * l1_norm / n_tot as f64
    );
    let mut csv = Vec::new();
    l1.write_csv(&mut csv).map_err(|e| amtrl::Error::Config(e.to_string()))?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}
