use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

#[derive(Debug, Clone)]
struct AdamSlot {
    m: Matrix,
    v: Matrix,
    t: u64,
}

/// First-order parameter optimizer. A machine owns one optimizer and assigns
/// each of its parameter matrices a stable slot index; Adam keeps
/// bias-corrected moment estimates per slot.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    slots: Vec<Option<AdamSlot>>,
}

impl Optimizer {
    pub fn sgd(lr: f64) -> Self {
        Optimizer {
            kind: OptimizerKind::Sgd,
            lr,
            slots: Vec::new(),
        }
    }

    pub fn adam(lr: f64) -> Self {
        Optimizer {
            kind: OptimizerKind::Adam {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            lr,
            slots: Vec::new(),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Apply one update to `param` from `grad` in the given slot.
    pub fn step(&mut self, slot: usize, param: &mut Matrix, grad: &Matrix) -> Result<()> {
        if param.shape() != grad.shape() {
            return Err(Error::shape("optimizer_step", param.shape_str(), grad.shape_str()));
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in param.data_mut().iter_mut().zip(grad.data()) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.slots.len() <= slot {
                    self.slots.resize(slot + 1, None);
                }
                let state = self.slots[slot].get_or_insert_with(|| AdamSlot {
                    m: Matrix::zeros(param.rows(), param.cols()),
                    v: Matrix::zeros(param.rows(), param.cols()),
                    t: 0,
                });
                if state.m.shape() != param.shape() {
                    return Err(Error::shape(
                        "optimizer_step slot",
                        state.m.shape_str(),
                        param.shape_str(),
                    ));
                }
                state.t += 1;
                let t = state.t as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                for ((p, g), (m, v)) in param
                    .data_mut()
                    .iter_mut()
                    .zip(grad.data())
                    .zip(state.m.data_mut().iter_mut().zip(state.v.data_mut()))
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= self.lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
