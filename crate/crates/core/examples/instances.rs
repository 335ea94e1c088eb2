//! Builds one instance of each family and samples a task from it.
//!
//! cargo run --release --example instances

use amtrl::instance::{make_aligned_worstcase_instance, make_almost_sparse_instance, make_random_instance, sample_task};
use amtrl::linalg::sigma_min;

fn main() -> amtrl::Result<()> {
    let random = make_random_instance(20, 4, 8, 0.5, 0.5, 1)?;
    println!("random:        sigma_min(W*) = {:.3}, |w_target| = {:.3}", sigma_min(&random.w_star), random.w_target_star.norm());

    let (sparse, nu) = make_almost_sparse_instance(20, 4, 11, 0.5, 1)?;
    println!("almost sparse: reference nu = {:.3?}", nu.as_slice());
    println!("               W* nu - w_target = {:.1e}", (&sparse.w_star * &nu - &sparse.w_target_star).norm());

    let aligned = make_aligned_worstcase_instance(20, 4, 8, 1.0, 1)?;
    println!("aligned:       |w_target| = {:.3} (c_w = 1)", aligned.w_target_star.norm());

    let data = sample_task(&random, 3, 5, 42)?;
    println!("task 3, 5 samples: y = {:.3?}", data.y.as_slice());
    let again = sample_task(&random, 3, 5, 42)?;
    assert_eq!(data.y, again.y);
    Ok(())
}
