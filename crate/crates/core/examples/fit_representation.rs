//! Alternating least squares on multi-task data: loss curve, recovered
//! subspace and the excess risk of the induced target predictor.
//!
//! cargo run --release --example fit_representation

use amtrl::instance::{make_random_instance, sample_task, sample_task_draw};
use amtrl::trainer::{self, FitOptions};

fn main() -> amtrl::Result<()> {
    let gt = make_random_instance(30, 3, 12, 0.3, 0.5, 7)?;
    for n in [20, 80, 320] {
        let data: Vec<_> = (1..=gt.t).map(|t| sample_task(&gt, t, n, 7)).collect::<amtrl::Result<_>>()?;
        let model = trainer::fit_source(&data, gt.k, &FitOptions::default())?;
        let target = sample_task_draw(&gt, gt.t + 1, 200, 7, 0)?;
        let model = model.with_target_head(&target)?;
        println!(
            "n_t = {n:>3}: {:>3} iterations, loss {:.4} -> {:.4}, subspace distance {:.4}, excess risk {:.2e}",
            model.iterations,
            model.train_loss_history[0],
            model.final_loss(),
            trainer::subspace_distance(&model.b_hat, &gt.b_star)?,
            trainer::excess_risk(&model, &gt)?,
        );
    }
    Ok(())
}
