//! Concrete learning machines.
//!
//! - [`GradLearner`] — gradient descent cast as target propagation: the
//!   target handed to the incoming layer is the input minus the loss
//!   gradient at the input
//! - [`LeastSquaresLearner`] — linear layer whose incoming target is found by
//!   ridge regression against the weights instead of a gradient step
//! - [`TargetPropLearner`] — learns an approximate inverse (reverse model)
//!   and applies it to the target; forward and reverse models train on
//!   alternating epochs
//! - [`FaLearner`] / [`DfaLearner`] — feedback alignment: a fixed random
//!   matrix replaces the weights on the backward route, either layer-to-layer
//!   or directly from the network output
//! - [`StackedLearner`] — the linear stack combinator that runs the whole
//!   forward / step / step_x choreography and records diagnostics

mod dfa;
mod fa;
mod grad;
mod least_squares;
mod stack;
mod target_prop;

pub use dfa::DfaLearner;
pub use fa::FaLearner;
pub use grad::{GradLearner, InputDescent};
pub use least_squares::{ridge_input_update, LeastSquaresLearner};
pub use stack::{
    LayerStepRecord, StackSlot, StackedLearner, StepMetrics, StepOrder, StepXKind, TargetRouting,
};
pub use target_prop::TargetPropLearner;
