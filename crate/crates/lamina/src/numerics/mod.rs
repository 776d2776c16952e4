//! Dense-matrix arithmetic, seeded randomness and the linear-algebra kernels
//! the rest of the crate builds on. Everything is f64, row-major and
//! batch-first: a data matrix is `[batch, features]`, weights are stored
//! `[out, in]` so a layer computes `y = x · Wᵀ + b`.

mod linalg;
mod matrix;
mod rng;

pub use linalg::{cholesky_solve, ridge_solve, softmax, softmax_cross_entropy};
pub use matrix::Matrix;
pub use rng::Rng;
