use crate::error::{Error, Result};
use crate::kaku::{
    next_machine_id, Assessment, Criterion, Io, LearningMachine, MachineId, Optimizer, State,
    StateValue,
};
use crate::layers::{Layer, Mode, Sequential};
use crate::numerics::Matrix;

/// Repeated gradient descent on a working copy of the input, used where a
/// single gradient target is too small to move the layer below.
#[derive(Debug, Clone, Copy)]
pub struct InputDescent {
    pub iterations: usize,
    pub step: f64,
}

/// A module trained by gradient descent whose `step_x` hands back the
/// gradient target `x − ∂L(N(x), t)/∂x`.
#[derive(Debug, Clone)]
pub struct GradLearner {
    id: MachineId,
    name: String,
    module: Sequential,
    criterion: Criterion,
    optimizer: Optimizer,
    step_x_scale: f64,
    input_descent: Option<InputDescent>,
}

impl GradLearner {
    pub fn new(name: &str, module: Sequential, criterion: Criterion, optimizer: Optimizer) -> Self {
        GradLearner {
            id: next_machine_id(),
            name: name.to_string(),
            module,
            criterion,
            optimizer,
            step_x_scale: 1.0,
            input_descent: None,
        }
    }

    /// Scale on the gradient subtracted in `step_x` (1.0 applies the target
    /// rule literally).
    pub fn with_step_x_scale(mut self, scale: f64) -> Self {
        self.step_x_scale = scale;
        self
    }

    pub fn with_input_descent(mut self, descent: InputDescent) -> Self {
        self.input_descent = Some(descent);
        self
    }

    pub fn module(&self) -> &Sequential {
        &self.module
    }

    pub fn criterion(&self) -> &Criterion {
        &self.criterion
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

    /// Iterated descent on a working copy of the input. Runs on a clone of
    /// the module so caches and running statistics stay untouched.
    fn descend_input(&self, x: &Matrix, t: &Matrix, descent: InputDescent) -> Result<Matrix> {
        let mut module = self.module.clone();
        let mut x_work = x.clone();
        for _ in 0..descent.iterations {
            let y = module.forward(&x_work, Mode::Train)?;
            let g = self.criterion.gradient(&y, t)?;
            let dx = module.backward(&g, false)?;
            x_work.sub_assign(&dx.scale(descent.step))?;
        }
        Ok(x_work)
    }
}

impl LearningMachine for GradLearner {
    fn id(&self) -> MachineId {
        self.id
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Io, state: &mut State, _release: bool) -> Result<Io> {
        let y = self.module.forward(x.single(), Mode::Train)?;
        let y = Io::from_matrix(y);
        state.store(self.id, x.id(), "y", StateValue::Io(y.clone()));
        state.store(self.id, x.id(), "forwarded", StateValue::Flag(true));
        Ok(y)
    }

    fn predict(&self, x: &Io) -> Result<Io> {
        Ok(Io::from_matrix(self.module.predict(x.single())?))
    }

    fn assess_y(&self, y: &Io, t: &Io) -> Result<Assessment> {
        self.criterion.assess(y, t)
    }

    fn accumulate(&mut self, x: &Io, t: &Io, state: &mut State) -> Result<()> {
        self.require_forwarded(x, state)?;
        let y = state.fetch_io(self.id, x.id(), "y")?.clone();
        let g = self.criterion.gradient(y.single(), t.single())?;
        let dx = self.module.backward(&g, true)?;
        state.store(self.id, x.id(), "dx", StateValue::Matrix(dx));
        state.store(self.id, x.id(), "accumulated", StateValue::Flag(true));
        Ok(())
    }

    fn has_accumulate(&self) -> bool {
        true
    }

    fn step(&mut self, x: &Io, t: &Io, state: &mut State) -> Result<()> {
        if !state.fetch_flag(self.id, x.id(), "accumulated") {
            self.accumulate(x, t, state)?;
        }
        self.module.apply_optimizer(&mut self.optimizer)?;
        state.store(self.id, x.id(), "stepped", StateValue::Flag(true));
        Ok(())
    }

    fn step_x(&mut self, x: &Io, t: &Io, state: &mut State) -> Result<Io> {
        self.require_forwarded(x, state)?;
        if let Some(descent) = self.input_descent {
            return Ok(Io::from_matrix(self.descend_input(
                x.single(),
                t.single(),
                descent,
            )?));
        }
        let dx = if state.fetch_flag(self.id, x.id(), "accumulated") {
            state.fetch_matrix(self.id, x.id(), "dx")?.clone()
        } else {
            let y = state.fetch_io(self.id, x.id(), "y")?.clone();
            let g = self.criterion.gradient(y.single(), t.single())?;
            self.module.backward(&g, false)?
        };
        Ok(Io::from_matrix(
            x.single().sub(&dx.scale(self.step_x_scale))?,
        ))
    }

    fn on_epoch(&mut self, epoch: u64) {
        self.module.on_epoch(epoch);
    }

    fn clone_machine(&self) -> Box<dyn LearningMachine> {
        Box::new(self.clone())
    }

    fn param_fingerprint(&self) -> u64 {
        self.module.param_fingerprint()
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}
