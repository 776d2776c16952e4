//! The core contracts of the framework: identity-carrying tensor tuples
//! ([`Io`]), per-step scratch state ([`State`]), scalar evaluations
//! ([`Assessment`]), loss criteria, optimizers, the [`LearningMachine`]
//! contract every layer implements, and the global/local error-reduction
//! diagnostics.

mod assessment;
mod criterion;
mod diagnostics;
mod io;
mod machine;
mod optim;
mod state;

pub use assessment::Assessment;
pub use criterion::{Criterion, CriterionKind, Reduction};
pub use diagnostics::{global_error_reduction, local_error_reduction, loss_of, suffix_loss};
pub use io::{Io, IoId};
pub use machine::{next_machine_id, LearningMachine, MachineId};
pub use optim::{Optimizer, OptimizerKind};
pub use state::{State, StateValue};
