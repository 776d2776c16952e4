use crate::error::{Error, Result};
use crate::kaku::{
    next_machine_id, Assessment, Criterion, Io, LearningMachine, MachineId, Optimizer, State,
    StateValue,
};
use crate::layers::{Layer, LinearLayer, Mode, Sequential};
use crate::numerics::{ridge_solve, Matrix};

/// The input update that solves `min‖Δx·Wᵀ − (t − y)‖² + lambda·‖Δx‖²` for a
/// linear layer with weights `w` and cached output `y`, returning `x + Δx`
/// where `Δx = (t − y)·W·(WᵀW + lambda·I)⁻¹`.
pub fn ridge_input_update(
    w: &Matrix,
    x: &Matrix,
    y: &Matrix,
    t: &Matrix,
    lambda: f64,
) -> Result<Matrix> {
    let residual = t.sub(y)?;
    // ridge on Wᵀ-systems, one right-hand side per sample
    let dx_t = ridge_solve(w, &residual.transpose(), lambda)?;
    x.add(&dx_t.transpose())
}

/// Linear layer (optionally followed by activation layers) whose parameters
/// train by gradient descent but whose incoming target comes from regularized
/// least squares against the weights. Gradients through the activation
/// suffix first carry the target back to the linear output; the ridge solve
/// then finds the input change that best realizes it.
#[derive(Debug, Clone)]
pub struct LeastSquaresLearner {
    id: MachineId,
    name: String,
    linear: LinearLayer,
    suffix: Sequential,
    criterion: Criterion,
    optimizer: Optimizer,
    lambda: f64,
}

impl LeastSquaresLearner {
    pub fn new(
        name: &str,
        linear: LinearLayer,
        suffix: Sequential,
        criterion: Criterion,
        optimizer: Optimizer,
        lambda: f64,
    ) -> Self {
        LeastSquaresLearner {
            id: next_machine_id(),
            name: name.to_string(),
            linear,
            suffix,
            criterion,
            optimizer,
            lambda,
        }
    }

    pub fn weights(&self) -> &Matrix {
        self.linear.weights()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
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

    /// Error at the linear output for the current `(y, t)`, obtained by
    /// backing the criterion gradient through the activation suffix.
    fn linear_output_delta(&mut self, y: &Matrix, t: &Matrix) -> Result<Matrix> {
        let g = self.criterion.gradient(y, t)?;
        if self.suffix.is_empty() {
            Ok(g)
        } else {
            self.suffix.backward(&g, false)
        }
    }
}

impl LearningMachine for LeastSquaresLearner {
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
        state.store(self.id, x.id(), "z", StateValue::Matrix(z));
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

    fn accumulate(&mut self, x: &Io, t: &Io, state: &mut State) -> Result<()> {
        self.require_forwarded(x, state)?;
        let y = state.fetch_io(self.id, x.id(), "y")?.clone();
        let g = self.criterion.gradient(y.single(), t.single())?;
        let gz = if self.suffix.is_empty() {
            g
        } else {
            self.suffix.backward(&g, true)?
        };
        self.linear.backward(&gz, true)?;
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

    fn step_x(&mut self, x: &Io, t: &Io, state: &mut State) -> Result<Io> {
        self.require_forwarded(x, state)?;
        let y = state.fetch_io(self.id, x.id(), "y")?.clone();
        let z = state.fetch_matrix(self.id, x.id(), "z")?.clone();
        let delta_z = self.linear_output_delta(y.single(), t.single())?;
        // gradient target at the linear output, then ridge toward it
        let t_z = z.sub(&delta_z)?;
        Ok(Io::from_matrix(ridge_input_update(
            self.linear.weights(),
            x.single(),
            &z,
            &t_z,
            self.lambda,
        )?))
    }

    fn clone_machine(&self) -> Box<dyn LearningMachine> {
        Box::new(self.clone())
    }

    fn param_fingerprint(&self) -> u64 {
        let mut h = self.suffix.param_fingerprint();
        for p in self.linear.params() {
            h = h.rotate_left(7) ^ p.fingerprint();
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
    use crate::numerics::Rng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_residual_returns_x() {
        let mut rng = Rng::new(21);
        let w = rng.gaussian(3, 4, 0.0, 1.0);
        let x = rng.gaussian(2, 4, 0.0, 1.0);
        let y = x.matmul_nt(&w).unwrap();
        let got = ridge_input_update(&w, &x, &y, &y, 0.1).unwrap();
        for (g, want) in got.data().iter().zip(x.data()) {
            assert_abs_diff_eq!(g, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn orthonormal_square_weights_invert_exactly() {
        // a rotation matrix is orthonormal, so lambda = 0 reaches t exactly
        let theta: f64 = 0.7;
        let w = Matrix::from_rows(&[
            &[theta.cos(), -theta.sin()],
            &[theta.sin(), theta.cos()],
        ])
        .unwrap();
        let b = Matrix::from_rows(&[&[0.3, -0.2]]).unwrap();
        let mut rng = Rng::new(22);
        let x = rng.gaussian(5, 2, 0.0, 1.0);
        let y = x.matmul_nt(&w).unwrap().add_row_broadcast(&b).unwrap();
        let t = rng.gaussian(5, 2, 0.0, 1.0);
        let x_new = ridge_input_update(&w, &x, &y, &t, 0.0).unwrap();
        let y_new = x_new.matmul_nt(&w).unwrap().add_row_broadcast(&b).unwrap();
        for (g, want) in y_new.data().iter().zip(t.data()) {
            assert_abs_diff_eq!(g, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn matches_normal_equations_oracle_and_reduces_error() {
        let mut rng = Rng::new(23);
        let w = rng.gaussian(5, 8, 0.0, 1.0);
        let x = rng.gaussian(8, 8, 0.0, 1.0);
        let y = x.matmul_nt(&w).unwrap();
        let t = rng.gaussian(8, 5, 0.0, 1.0);
        let lambda = 0.1;
        let x_new = ridge_input_update(&w, &x, &y, &t, lambda).unwrap();
        let dx = x_new.sub(&x).unwrap();

        // oracle: Δxᵀ = (WᵀW + λI)⁻¹ Wᵀ rᵀ via explicit inverse (Gauss-Jordan
        // through ridge_solve is the implementation path, so invert here by
        // solving with identity right-hand side and dense multiplication)
        let r = t.sub(&y).unwrap();
        let mut gram = w.matmul_tn(&w).unwrap();
        for i in 0..gram.rows() {
            gram.set(i, i, gram.get(i, i) + lambda);
        }
        // Gauss-Jordan inverse
        let n = gram.rows();
        let mut aug = Matrix::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug.set(i, j, gram.get(i, j));
            }
            aug.set(i, n + i, 1.0);
        }
        for col in 0..n {
            let mut piv = col;
            for row in col + 1..n {
                if aug.get(row, col).abs() > aug.get(piv, col).abs() {
                    piv = row;
                }
            }
            if piv != col {
                for j in 0..2 * n {
                    let tmp = aug.get(col, j);
                    aug.set(col, j, aug.get(piv, j));
                    aug.set(piv, j, tmp);
                }
            }
            let d = aug.get(col, col);
            for j in 0..2 * n {
                aug.set(col, j, aug.get(col, j) / d);
            }
            for row in 0..n {
                if row != col {
                    let f = aug.get(row, col);
                    for j in 0..2 * n {
                        aug.set(row, j, aug.get(row, j) - f * aug.get(col, j));
                    }
                }
            }
        }
        let mut inv = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv.set(i, j, aug.get(i, n + j));
            }
        }
        let want_dx = r.matmul(&w).unwrap().matmul(&inv).unwrap();
        for (g, want) in dx.data().iter().zip(want_dx.data()) {
            assert_abs_diff_eq!(g, want, epsilon = 1e-9);
        }

        // strictly reduces the squared error against Δx = 0
        let before = y.sub(&t).unwrap().sum_squares();
        let after = x_new.matmul_nt(&w).unwrap().sub(&t).unwrap().sum_squares();
        assert!(after < before);
    }

    #[test]
    fn singular_gram_at_zero_lambda_errors() {
        // duplicate weight columns make WᵀW singular
        let w = Matrix::from_rows(&[&[1.0, 1.0], &[2.0, 2.0]]).unwrap();
        let x = Matrix::from_rows(&[&[0.5, 0.5]]).unwrap();
        let y = x.matmul_nt(&w).unwrap();
        let t = Matrix::from_rows(&[&[1.0, 0.0]]).unwrap();
        assert!(matches!(
            ridge_input_update(&w, &x, &y, &t, 0.0),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn never_increases_layer_squared_error() {
        let mut rng = Rng::new(24);
        for trial in 0..50 {
            let mut trial_rng = rng.child(&format!("trial:{trial}"));
            let out = 2 + trial_rng.index(6);
            let inp = 2 + trial_rng.index(6);
            let batch = 1 + trial_rng.index(6);
            let w = trial_rng.gaussian(out, inp, 0.0, 1.0);
            let b = trial_rng.gaussian(1, out, 0.0, 0.3);
            let x = trial_rng.gaussian(batch, inp, 0.0, 1.0);
            let y = x.matmul_nt(&w).unwrap().add_row_broadcast(&b).unwrap();
            let t = trial_rng.gaussian(batch, out, 0.0, 1.0);
            let x_new = ridge_input_update(&w, &x, &y, &t, 1e-3).unwrap();
            let y_new = x_new.matmul_nt(&w).unwrap().add_row_broadcast(&b).unwrap();
            let before = y.sub(&t).unwrap().sum_squares();
            let after = y_new.sub(&t).unwrap().sum_squares();
            assert!(after <= before + 1e-12, "trial {trial}: {after} > {before}");
        }
    }
}
