//! Geometric multi-stage sampling: each stage refits on all data so far and
//! re-targets the next stage.
//!
//! cargo run --release --example multistage

use amtrl::instance::make_almost_sparse_instance;
use amtrl::pipeline::{self, InstanceOracle, RunParams};

fn main() -> amtrl::Result<()> {
    let (gt, _) = make_almost_sparse_instance(10, 3, 20, 0.5, 4)?;
    let oracle = InstanceOracle::new(&gt, 4);
    let params = RunParams { n_tot: 15000, n_floor: 20, n_target: 500, stages: 4, growth: 2.0, ..RunParams::default() };
    let run = pipeline::run_multistage(&oracle, gt.k, &params, 4)?;
    for s in &run.stages {
        let added: u64 = s.allocation.n.iter().sum();
        println!(
            "stage {}: +{added:>5} samples (task 1 now {:>5}), ER {:.2e}, subspace distance {:.3}",
            s.stage, s.cumulative[0], s.excess_risk, s.subspace_distance
        );
    }
    println!("total samples {}", run.total_samples);
    Ok(())
}
