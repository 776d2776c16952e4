use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::Result;
use crate::kaku::{Assessment, Io, State};

static NEXT_MACHINE_ID: AtomicU64 = AtomicU64::new(1);

/// Identity of a learning machine, used to key its [`State`] entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MachineId(u64);

pub fn next_machine_id() -> MachineId {
    MachineId(NEXT_MACHINE_ID.fetch_add(1, Ordering::Relaxed))
}

/// A semi-autonomous learning machine: one layer of a deep model, owning its
/// own forward computation, its own evaluation, its own parameter-update rule
/// and its own rule for producing the target of the layer below it.
///
/// The training flow for one step is `forward` → (`accumulate`) → `step` /
/// `step_x` in either order. `step` updates the machine's parameters toward
/// `t`; `step_x` computes from `(x, t)` the target io handed to the incoming
/// machine. `step_x` must never touch parameters, and `step` must never
/// mutate its `x` argument.
pub trait LearningMachine {
    fn id(&self) -> MachineId;

    fn name(&self) -> &str;

    /// Run the machine on `x`, caching in `state` whatever `step`/`step_x`
    /// will need. `release` is accepted for interface fidelity but has no
    /// effect here: there is no global differentiation tape to detach from.
    fn forward(&mut self, x: &Io, state: &mut State, release: bool) -> Result<Io>;

    /// Pure eval-mode forward: no caches, no state, no mutation.
    fn predict(&self, x: &Io) -> Result<Io>;

    /// Evaluate an output against a target under the machine's own criterion.
    fn assess_y(&self, y: &Io, t: &Io) -> Result<Assessment>;

    /// Gather parameter changes without applying them. Optional; machines
    /// that implement it must make `step` apply exactly what was gathered.
    fn accumulate(&mut self, _x: &Io, _t: &Io, _state: &mut State) -> Result<()> {
        Ok(())
    }

    fn has_accumulate(&self) -> bool {
        false
    }

    /// Apply the parameter update for `(x, t)`.
    fn step(&mut self, x: &Io, t: &Io, state: &mut State) -> Result<()>;

    /// Compute the target for the incoming machine from `(x, t)`.
    fn step_x(&mut self, x: &Io, t: &Io, state: &mut State) -> Result<Io>;

    /// Called once per epoch so machines with epoch-dependent behaviour
    /// (training-phase alternation, schedule decay) can advance.
    fn on_epoch(&mut self, _epoch: u64) {}

    fn clone_machine(&self) -> Box<dyn LearningMachine>;

    /// Order-independent hash of all parameters; lets tests assert exactly
    /// which updates touched which machine.
    fn param_fingerprint(&self) -> u64;

    /// Concrete-type escape hatch for callers that need machine-specific
    /// accessors behind `Box<dyn LearningMachine>`.
    fn as_any(&self) -> &dyn std::any::Any;
}

impl Clone for Box<dyn LearningMachine> {
    fn clone(&self) -> Self {
        self.clone_machine()
    }
}
