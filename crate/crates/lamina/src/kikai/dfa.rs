use crate::error::{Error, Result};
use crate::kaku::{
    next_machine_id, Assessment, Criterion, Io, LearningMachine, MachineId, Optimizer, State,
    StateValue,
};
use crate::layers::{Layer, LinearLayer, Mode, Sequential};
use crate::numerics::{Matrix, Rng};

/// Direct-feedback-alignment layer: the global output error is projected
/// straight onto this layer through a fixed matrix `B` of shape
/// `[layer width, network output width]`, skipping every intermediate layer.
/// No targets propagate between layers — the owning stack stores the global
/// error in state before calling `step`.
#[derive(Debug, Clone)]
pub struct DfaLearner {
    id: MachineId,
    name: String,
    linear: LinearLayer,
    suffix: Sequential,
    feedback: Matrix,
    criterion: Criterion,
    optimizer: Optimizer,
}

impl DfaLearner {
    pub fn new(
        name: &str,
        in_features: usize,
        out_features: usize,
        network_outputs: usize,
        suffix: Sequential,
        criterion: Criterion,
        optimizer: Optimizer,
        rng: &mut Rng,
    ) -> Self {
        let linear = LinearLayer::new(in_features, out_features, rng);
        let std = 1.0 / (in_features as f64).sqrt();
        let feedback = rng.gaussian(out_features, network_outputs, 0.0, std);
        DfaLearner {
            id: next_machine_id(),
            name: name.to_string(),
            linear,
            suffix,
            feedback,
            criterion,
            optimizer,
        }
    }

    pub fn with_feedback(mut self, feedback: Matrix) -> Self {
        assert_eq!(feedback.rows(), self.linear.weights().rows());
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
                "{}: step before forward for this io",
                self.name
            )));
        }
        Ok(())
    }

    /// Project the global error onto this layer and accumulate parameter
    /// gradients: `δ = (global_error·Bᵀ)` carried back through the activation
    /// suffix to the affine map.
    pub fn dfa_accumulate(&mut self, x: &Matrix, global_error: &Matrix) -> Result<()> {
        if global_error.cols() != self.feedback.cols() {
            return Err(Error::shape(
                "dfa_accumulate",
                global_error.shape_str(),
                format!("network outputs {}", self.feedback.cols()),
            ));
        }
        let e = global_error.matmul_nt(&self.feedback)?;
        let delta_z = if self.suffix.is_empty() {
            e
        } else {
            self.suffix.backward(&e, true)?
        };
        self.linear.backward(&delta_z, true)?;
        let _ = x;
        Ok(())
    }
}

impl LearningMachine for DfaLearner {
    fn id(&self) -> MachineId {
        self.id
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Io, state: &mut State, _release: bool) -> Result<Io> {
        let z = self.linear.forward(x.single(), Mode::Train)?;
        let y = self.suffix.forward(&z, Mode::Train)?;
        let y = Io::from_matrix(y);
        state.store(self.id, x.id(), "y", StateValue::Io(y.clone()));
        state.store(self.id, x.id(), "forwarded", StateValue::Flag(true));
        Ok(y)
    }

    fn predict(&self, x: &Io) -> Result<Io> {
        let z = self.linear.predict(x.single())?;
        Ok(Io::from_matrix(self.suffix.predict(&z)?))
    }

    fn assess_y(&self, y: &Io, t: &Io) -> Result<Assessment> {
        self.criterion.assess(y, t)
    }

    fn accumulate(&mut self, x: &Io, _t: &Io, state: &mut State) -> Result<()> {
        self.require_forwarded(x, state)?;
        let global_error = state
            .fetch_matrix(self.id, x.id(), "global_error")
            .map_err(|_| {
                Error::Ordering(format!(
                    "{}: no global error stored for this io; the owning stack \
                     must compute it from the network output first",
                    self.name
                ))
            })?
            .clone();
        self.dfa_accumulate(&x.single().clone(), &global_error)?;
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
        for (p, g) in self.suffix.param_grad_pairs() {
            self.optimizer.step(slot, p, g)?;
            slot += 1;
        }
        self.linear.zero_grads();
        self.suffix.zero_grads();
        state.store(self.id, x.id(), "stepped", StateValue::Flag(true));
        Ok(())
    }

    fn step_x(&mut self, _x: &Io, _t: &Io, _state: &mut State) -> Result<Io> {
        Err(Error::Ordering(format!(
            "{}: direct-feedback layers receive the global error and do not \
             propagate targets",
            self.name
        )))
    }

    fn clone_machine(&self) -> Box<dyn LearningMachine> {
        Box::new(self.clone())
    }

    fn param_fingerprint(&self) -> u64 {
        let mut h = self.suffix.param_fingerprint();
        for p in self.linear.params() {
            h = h.rotate_left(11) ^ p.fingerprint();
        }
        h
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_global_error_changes_nothing() {
        let mut rng = Rng::new(51);
        let mut layer = DfaLearner::new(
            "dfa",
            4,
            3,
            10,
            Sequential::new(vec![Box::new(crate::layers::ReluLayer::new())]),
            Criterion::cross_entropy(),
            Optimizer::sgd(0.5),
            &mut rng,
        );
        let mut state = State::new();
        let x = Io::from_matrix(rng.gaussian(2, 4, 0.0, 1.0));
        layer.forward(&x, &mut state, true).unwrap();
        state.store(
            layer.id(),
            x.id(),
            "global_error",
            StateValue::Matrix(Matrix::zeros(2, 10)),
        );
        let before = layer.param_fingerprint();
        let t = Io::from_matrix(Matrix::from_labels(&[0, 1]));
        layer.step(&x, &t, &mut state).unwrap();
        assert_eq!(layer.param_fingerprint(), before);
    }

    #[test]
    fn wrong_global_error_width_is_a_shape_error() {
        let mut rng = Rng::new(52);
        let mut layer = DfaLearner::new(
            "dfa",
            4,
            3,
            10,
            Sequential::default(),
            Criterion::cross_entropy(),
            Optimizer::sgd(0.5),
            &mut rng,
        );
        let x = rng.gaussian(2, 4, 0.0, 1.0);
        let mut state = State::new();
        layer
            .forward(&Io::from_matrix(x.clone()), &mut state, true)
            .unwrap();
        let err = layer.dfa_accumulate(&x, &Matrix::zeros(2, 7)).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn feedback_set_to_true_output_weights_reproduces_backprop() {
        // hidden layer + linear output head; when B equals the head's
        // weights the projected error equals the backpropagated one, so the
        // hidden update must match exact backprop
        let mut rng = Rng::new(53);
        let x = rng.gaussian(6, 5, 0.0, 1.0);
        let labels: Vec<usize> = (0..6).map(|i| i % 3).collect();

        let head = LinearLayer::new(4, 3, &mut rng.child("head"));
        let hidden_w = rng.gaussian(4, 5, 0.0, 0.5);

        // dfa hidden layer with B := head weights
        let mut dfa = DfaLearner::new(
            "dfa",
            5,
            4,
            3,
            Sequential::new(vec![Box::new(crate::layers::ReluLayer::new())]),
            Criterion::cross_entropy(),
            Optimizer::sgd(1.0),
            &mut rng.child("dfa"),
        );
        dfa.linear = LinearLayer::from_parts(hidden_w.clone(), Matrix::zeros(1, 4));
        // [layer width, network outputs]: the transpose of the head weights
        dfa = dfa.with_feedback(head.weights().transpose());

        // forward both layers
        let mut state = State::new();
        let x_io = Io::from_matrix(x.clone());
        let h = dfa.forward(&x_io, &mut state, true).unwrap();
        let logits = head.predict(h.single()).unwrap();
        let (_, global_error) =
            crate::numerics::softmax_cross_entropy(&logits, &labels).unwrap();
        state.store(
            dfa.id(),
            x_io.id(),
            "global_error",
            StateValue::Matrix(global_error.clone()),
        );
        let w_before = dfa.weights().clone();
        let t = Io::from_matrix(Matrix::from_labels(&labels));
        dfa.step(&x_io, &t, &mut state).unwrap();
        let dfa_change = dfa.weights().sub(&w_before).unwrap();

        // exact backprop reference on the same network
        let mut reference = Sequential::new(vec![
            Box::new(LinearLayer::from_parts(hidden_w, Matrix::zeros(1, 4))),
            Box::new(crate::layers::ReluLayer::new()),
            Box::new(head.clone()),
        ]);
        reference.forward(&x, Mode::Train).unwrap();
        reference.backward(&global_error, true).unwrap();
        let want_change = reference.param_grad_pairs()[0].1.scale(-1.0);

        for (g, w) in dfa_change.data().iter().zip(want_change.data()) {
            assert_abs_diff_eq!(g, w, epsilon = 1e-10);
        }
    }

    #[test]
    fn two_layers_update_from_one_global_error_pass() {
        let mut rng = Rng::new(54);
        let mut a = DfaLearner::new(
            "dfa-a",
            5,
            4,
            3,
            Sequential::default(),
            Criterion::cross_entropy(),
            Optimizer::sgd(0.1),
            &mut rng.child("a"),
        );
        let mut b = DfaLearner::new(
            "dfa-b",
            4,
            4,
            3,
            Sequential::default(),
            Criterion::cross_entropy(),
            Optimizer::sgd(0.1),
            &mut rng.child("b"),
        );
        let mut state = State::new();
        let x = Io::from_matrix(rng.gaussian(2, 5, 0.0, 1.0));
        let h = a.forward(&x, &mut state, true).unwrap();
        b.forward(&h, &mut state, true).unwrap();
        let ge = rng.gaussian(2, 3, 0.0, 1.0);
        state.store(a.id(), x.id(), "global_error", StateValue::Matrix(ge.clone()));
        state.store(b.id(), h.id(), "global_error", StateValue::Matrix(ge));
        let (fa0, fb0) = (a.param_fingerprint(), b.param_fingerprint());
        let t = Io::from_matrix(Matrix::from_labels(&[0, 1]));
        a.step(&x, &t, &mut state).unwrap();
        b.step(&h, &t, &mut state).unwrap();
        assert_ne!(a.param_fingerprint(), fa0);
        assert_ne!(b.param_fingerprint(), fb0);
    }
}
