//! Deterministic random streams.
//!
//! Every draw is keyed by `(master seed, task index, draw index)`. Each key maps to
//! its own ChaCha stream, so tasks can be sampled in any order (or in parallel)
//! and still produce the same bits.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream used for instance construction (never collides with a task stream,
/// whose task index is at least 1).
pub const INSTANCE_STREAM: u32 = 0;

pub fn stream(seed: u64, task_index: u32, draw_index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((task_index as u64) << 32) | draw_index as u64);
    rng
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    // Row-major fill so that prefixes of a stream give prefixes of rows.
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}
