//! Two-phase active sampling against uniform sampling at equal budgets on
//! an instance whose target depends mostly on one source task.
//!
//! cargo run --release --example active_vs_passive

use amtrl::instance::make_almost_sparse_instance;
use amtrl::pipeline::{self, InstanceOracle, RunParams};

fn main() -> amtrl::Result<()> {
    let (gt, _) = make_almost_sparse_instance(10, 3, 50, 0.5, 0)?;
    let oracle = InstanceOracle::new(&gt, 0);
    for n_tot in [3000, 12000] {
        let params = RunParams { n_tot, n_floor: 20, n_target: 500, ..RunParams::default() };
        let active = pipeline::run_l1_amtrl(&oracle, gt.k, &params, 0)?;
        let passive = pipeline::run_passive(&oracle, gt.k, &params, 0)?;
        let counts = active.final_counts();
        println!(
            "N = {n_tot:>5}: active ER {:.2e} (task 1 gets {} samples, estimated |nu|_1 {:.2}), passive ER {:.2e}",
            active.excess_risk, counts[0], active.nu_l1, passive.excess_risk
        );
    }
    Ok(())
}
