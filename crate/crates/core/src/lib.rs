//! Active multi-task linear representation learning with L1 source-task sampling.
//!
//! The crate is organized around the lifecycle of one experiment:
//!
//! - [`instance`]: ground-truth linear representation models and synthetic task data.
//! - [`trainer`]: alternating least squares for the shared representation and heads.
//! - [`relevance`]: estimators of the source/target relevance vector (Lasso,
//!   minimum-norm, exact L1 by linear programming) and their diagnostics.
//! - [`allocation`]: relevance-to-budget rules, the bi-level oracle and task costs.
//! - [`pipeline`]: end-to-end active and passive strategies.
//! - [`harness`]: configuration, sweeps, verification suites and file output.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod allocation;
pub mod error;
pub mod harness;
pub mod instance;
pub mod linalg;
pub mod pipeline;
pub mod relevance;
pub mod rng;
pub mod serde_matrix;
pub mod trainer;

pub use error::{Error, Result};
