//! Sample allocation under per-task fixed costs: the sparse relevance vector
//! touches at most k paid tasks, the uniform split pays for all of them.
//!
//! cargo run --release --example cost_aware

use amtrl::allocation::{self, cost_aware_allocate, min_cost_support_oracle, passive_allocation, CostFunction};
use amtrl::instance::make_almost_sparse_instance;
use amtrl::relevance;

fn main() -> amtrl::Result<()> {
    let (t, k, floor, n_tot) = (50, 5, 20, 3000);
    let (gt, _) = make_almost_sparse_instance(10, k, t, 0.5, 0)?;
    let costs = vec![CostFunction::saltus(100.0, 1.0, floor); t];
    let nu1 = relevance::l1_oracle_lp(&gt.w_star, &gt.w_target_star)?;
    let sparse = cost_aware_allocate(&nu1.nu, n_tot, floor, &costs)?;
    let uniform = passive_allocation(t, n_tot, floor)?;
    let paid = sparse.n.iter().filter(|&&c| c > floor).count();
    println!(
        "cost-aware: {paid} paid tasks, cost {:.0}; uniform: cost {:.0}",
        allocation::total_cost(&sparse.n, &costs)?,
        allocation::total_cost(&uniform.n, &costs)?
    );

    // Exhaustive support search on a smaller instance.
    let (small, _) = make_almost_sparse_instance(10, 3, 10, 0.5, 0)?;
    let costs = vec![CostFunction::saltus(100.0, 1.0, floor); 10];
    let plan = min_cost_support_oracle(&small.w_star, &small.w_target_star, floor, &costs, 1e-3)?;
    println!("cheapest support for sum nu^2/n <= 1e-3: {:?}, counts {:?}, cost {:.0}", plan.support, plan.counts, plan.cost);
    Ok(())
}
