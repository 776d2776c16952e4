use crate::error::{Error, Result};
use crate::kaku::{
    next_machine_id, Assessment, Criterion, Io, LearningMachine, MachineId, Optimizer, State,
    StateValue,
};
use crate::layers::{Layer, LinearLayer, Mode};
use crate::numerics::{Matrix, Rng};

/// Feedback-alignment layer: an affine map with optional ReLU whose backward
/// route to the incoming layer uses a fixed random matrix `B` (same shape as
/// the weights) instead of the weights themselves. `B` never changes after
/// construction.
///
/// The parameter update is the ordinary delta rule on the mediated target:
/// the error this layer receives already travelled through the feedback
/// matrix of the layer above, so each weight change ends up proportional to
/// `((B·δ_above) ⊙ φ′(z)) xᵀ`.
#[derive(Debug, Clone)]
pub struct FaLearner {
    id: MachineId,
    name: String,
    linear: LinearLayer,
    relu: bool,
    feedback: Matrix,
    criterion: Criterion,
    optimizer: Optimizer,
}

impl FaLearner {
    pub fn new(
        name: &str,
        in_features: usize,
        out_features: usize,
        relu: bool,
        criterion: Criterion,
        optimizer: Optimizer,
        rng: &mut Rng,
    ) -> Self {
        let linear = LinearLayer::new(in_features, out_features, rng);
        // gaussian feedback, std 1/√fan_in, fixed for the life of the layer
        let std = 1.0 / (in_features as f64).sqrt();
        let feedback = rng.gaussian(out_features, in_features, 0.0, std);
        FaLearner {
            id: next_machine_id(),
            name: name.to_string(),
            linear,
            relu,
            feedback,
            criterion,
            optimizer,
        }
    }

    pub fn with_feedback(mut self, feedback: Matrix) -> Self {
        assert_eq!(
            feedback.shape(),
            self.linear.weights().shape(),
            "feedback matrix must match the weight shape"
        );
        self.feedback = feedback;
        self
    }

    pub fn feedback(&self) -> &Matrix {
        &self.feedback
    }

    pub fn weights(&self) -> &Matrix {
        self.linear.weights()
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

    fn activation_mask(&self, z: &Matrix) -> Option<Matrix> {
        if self.relu {
            Some(z.map(|v| if v > 0.0 { 1.0 } else { 0.0 }))
        } else {
            None
        }
    }

    /// Pre-activation delta for an error arriving at the layer output.
    fn delta_from_output_error(&self, z: &Matrix, e: &Matrix) -> Result<Matrix> {
        match self.activation_mask(z) {
            Some(mask) => e.hadamard(&mask),
            None => Ok(e.clone()),
        }
    }

    /// Accumulate weight and bias gradients from an error at the layer
    /// output: `δ = e ⊙ φ′(z)`, `ΔW += δᵀ·x`, `Δb += column sums of δ`.
    pub fn fa_accumulate(&mut self, x: &Matrix, z: &Matrix, e: &Matrix) -> Result<Matrix> {
        let delta = self.delta_from_output_error(z, e)?;
        // reuse the linear layer's backward for the buffer arithmetic; its
        // cached input is x because forward ran on it
        self.linear.backward(&delta, true)?;
        let _ = x;
        Ok(delta)
    }
}

impl LearningMachine for FaLearner {
    fn id(&self) -> MachineId {
        self.id
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Io, state: &mut State, _release: bool) -> Result<Io> {
        let z = self.linear.forward(x.single(), Mode::Train)?;
        let y = if self.relu { z.map(|v| v.max(0.0)) } else { z.clone() };
        let y = Io::from_matrix(y);
        state.store(self.id, x.id(), "z", StateValue::Matrix(z));
        state.store(self.id, x.id(), "y", StateValue::Io(y.clone()));
        state.store(self.id, x.id(), "forwarded", StateValue::Flag(true));
        Ok(y)
    }

    fn predict(&self, x: &Io) -> Result<Io> {
        let z = self.linear.predict(x.single())?;
        Ok(Io::from_matrix(if self.relu {
            z.map(|v| v.max(0.0))
        } else {
            z
        }))
    }

    fn assess_y(&self, y: &Io, t: &Io) -> Result<Assessment> {
        self.criterion.assess(y, t)
    }

    fn accumulate(&mut self, x: &Io, t: &Io, state: &mut State) -> Result<()> {
        self.require_forwarded(x, state)?;
        let z = state.fetch_matrix(self.id, x.id(), "z")?.clone();
        let y = state.fetch_io(self.id, x.id(), "y")?.clone();
        let e = self.criterion.gradient(y.single(), t.single())?;
        let delta = self.fa_accumulate(&x.single().clone(), &z, &e)?;
        state.store(self.id, x.id(), "delta", StateValue::Matrix(delta));
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
        let mut slot = 0;
        for (p, g) in self.linear.param_grad_pairs() {
            self.optimizer.step(slot, p, g)?;
            slot += 1;
        }
        self.linear.zero_grads();
        state.store(self.id, x.id(), "stepped", StateValue::Flag(true));
        Ok(())
    }

    fn step_x(&mut self, x: &Io, t: &Io, state: &mut State) -> Result<Io> {
        self.require_forwarded(x, state)?;
        let delta = if state.fetch_flag(self.id, x.id(), "accumulated") {
            state.fetch_matrix(self.id, x.id(), "delta")?.clone()
        } else {
            let z = state.fetch_matrix(self.id, x.id(), "z")?.clone();
            let y = state.fetch_io(self.id, x.id(), "y")?.clone();
            let e = self.criterion.gradient(y.single(), t.single())?;
            self.delta_from_output_error(&z, &e)?
        };
        // gradient step on the input with B standing in for the weights
        let dx = delta.matmul(&self.feedback)?;
        Ok(Io::from_matrix(x.single().sub(&dx)?))
    }

    fn clone_machine(&self) -> Box<dyn LearningMachine> {
        Box::new(self.clone())
    }

    fn param_fingerprint(&self) -> u64 {
        let mut h = 0xfa;
        for p in self.linear.params() {
            h = (h as u64).rotate_left(9) ^ p.fingerprint();
        }
        h as u64
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}
