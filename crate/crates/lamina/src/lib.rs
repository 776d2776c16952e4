//! lamina — deep models as stacks of semi-autonomous learning machines.
//!
//! Instead of one monolithic backward pass, every layer of a lamina model is
//! a [`kaku::LearningMachine`] with its own target, its own parameter-update
//! rule (`step`) and its own rule for producing the target of the layer below
//! it (`step_x`). Gradient descent, regularized least squares, learned
//! reverse models, feedback alignment and population search all become
//! interchangeable per-layer strategies.
//!
//! Module map:
//!
//! - [`numerics`] — dense f64 matrices, seeded splittable RNG, ridge solve,
//!   softmax cross-entropy
//! - [`kaku`] — the core contracts: `IO`, `State`, `Assessment`, criteria,
//!   optimizers, the `LearningMachine` trait and error-reduction diagnostics
//! - [`layers`] — hand-written forward/backward blocks: linear, ReLU,
//!   dropout, 1-D batch norm, sequential composition, gradient checking
//! - [`kikai`] — concrete machines: gradient learner, least-squares target
//!   step, reconstruction target propagation, feedback alignment (direct and
//!   indirect), and the linear stack combinator
//! - [`trees`] — CART decision trees, the FIFO refit ensemble and the tree
//!   layer with hill-climbing target selection
//! - [`tansaku`] — population-based search: populate, perturb, assess, reduce
//! - [`harness`] — MNIST IDX / synthetic data, experiment configs, the
//!   training loop, metrics persistence

pub mod error;
pub mod harness;
pub mod kaku;
pub mod kikai;
pub mod layers;
pub mod numerics;
pub mod tansaku;
pub mod trees;

pub use error::{Error, Result};
pub use numerics::{Matrix, Rng};
