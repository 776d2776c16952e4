use crate::error::{Error, Result};
use crate::kaku::{
    next_machine_id, Assessment, Criterion, Io, LearningMachine, MachineId, Optimizer, State,
    StateValue,
};
use crate::layers::{Layer, Mode, Sequential};
use crate::numerics::Matrix;

/// Target propagation through a learned reverse model.
///
/// The forward module maps x to y as usual; the reverse module learns an
/// approximate inverse from (y, x) pairs. The incoming target is simply the
/// reverse model applied to this layer's target. Training alternates by
/// epoch: odd epochs fit the reverse model, even epochs fit the forward
/// model, and `step_x` itself never trains either.
#[derive(Debug, Clone)]
pub struct TargetPropLearner {
    id: MachineId,
    name: String,
    forward_module: Sequential,
    reverse_module: Sequential,
    criterion: Criterion,
    reverse_criterion: Criterion,
    forward_opt: Optimizer,
    reverse_opt: Optimizer,
    epoch: u64,
}

impl TargetPropLearner {
    pub fn new(
        name: &str,
        forward_module: Sequential,
        reverse_module: Sequential,
        criterion: Criterion,
        forward_opt: Optimizer,
        reverse_opt: Optimizer,
    ) -> Self {
        TargetPropLearner {
            id: next_machine_id(),
            name: name.to_string(),
            forward_module,
            reverse_module,
            criterion,
            reverse_criterion: Criterion::mse(),
            forward_opt,
            reverse_opt,
            epoch: 0,
        }
    }

    pub fn forward_fingerprint(&self) -> u64 {
        self.forward_module.param_fingerprint()
    }

    pub fn reverse_fingerprint(&self) -> u64 {
        self.reverse_module.param_fingerprint()
    }

    /// Reverse loss on the current (y → x) pair, for diagnostics.
    pub fn reconstruction_loss(&self, y: &Matrix, x: &Matrix) -> Result<f64> {
        let r = self.reverse_module.predict(y)?;
        self.reverse_criterion.evaluate(&r, x)
    }

    /// One alternating training tick: odd epochs fit the reverse model on
    /// (y → x) pairs, even epochs fit the forward model toward the
    /// propagated target.
    pub fn train_tick(&mut self, x: &Matrix, y: &Matrix, t: &Matrix, epoch: u64) -> Result<()> {
        if epoch % 2 == 1 {
            let recon = self.reverse_module.forward(y, Mode::Train)?;
            let g = self.reverse_criterion.gradient(&recon, x)?;
            self.reverse_module.backward(&g, true)?;
            self.reverse_module.apply_optimizer(&mut self.reverse_opt)?;
        } else {
            let g = self.criterion.gradient(y, t)?;
            self.forward_module.backward(&g, true)?;
            self.forward_module.apply_optimizer(&mut self.forward_opt)?;
        }
        Ok(())
    }

    fn require_forwarded(&self, x: &Io, state: &State) -> Result<()> {
        if !state.fetch_flag(self.id, x.id(), "forwarded") {
            return Err(Error::Ordering(format!(
                "{}: step/step_x before forward for this io",
                self.name
            )));
        }
        Ok(())
    }
}

impl LearningMachine for TargetPropLearner {
    fn id(&self) -> MachineId {
        self.id
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Io, state: &mut State, _release: bool) -> Result<Io> {
        let y = self.forward_module.forward(x.single(), Mode::Train)?;
        let y = Io::from_matrix(y);
        state.store(self.id, x.id(), "y", StateValue::Io(y.clone()));
        state.store(self.id, x.id(), "forwarded", StateValue::Flag(true));
        Ok(y)
    }

    fn predict(&self, x: &Io) -> Result<Io> {
        Ok(Io::from_matrix(self.forward_module.predict(x.single())?))
    }

    fn assess_y(&self, y: &Io, t: &Io) -> Result<Assessment> {
        self.criterion.assess(y, t)
    }

    fn step(&mut self, x: &Io, t: &Io, state: &mut State) -> Result<()> {
        self.require_forwarded(x, state)?;
        let y = state.fetch_io(self.id, x.id(), "y")?.clone();
        let epoch = self.epoch;
        self.train_tick(x.single(), y.single(), t.single(), epoch)?;
        state.store(self.id, x.id(), "stepped", StateValue::Flag(true));
        Ok(())
    }

    fn step_x(&mut self, _x: &Io, t: &Io, _state: &mut State) -> Result<Io> {
        // eval-mode application of the learned inverse; trains nothing
        Ok(Io::from_matrix(self.reverse_module.predict(t.single())?))
    }

    fn on_epoch(&mut self, epoch: u64) {
        self.epoch = epoch;
    }

    fn clone_machine(&self) -> Box<dyn LearningMachine> {
        Box::new(self.clone())
    }

    fn param_fingerprint(&self) -> u64 {
        self.forward_fingerprint()
            .rotate_left(19)
            .wrapping_add(self.reverse_fingerprint())
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}
