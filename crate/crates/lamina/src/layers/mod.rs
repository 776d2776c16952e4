//! Differentiable building blocks with hand-written forward and backward
//! passes. Layers cache whatever their backward needs during forward;
//! backward accumulates parameter gradients into per-layer buffers (so
//! repeated backwards add up) and returns the gradient with respect to the
//! input.

mod batchnorm;
mod dropout;
pub mod gradcheck;
mod linear;
mod relu;

pub use batchnorm::BatchNormLayer;
pub use dropout::DropoutLayer;
pub use linear::LinearLayer;
pub use relu::ReluLayer;

use crate::error::{Error, Result};
use crate::kaku::Optimizer;
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub trait Layer: std::fmt::Debug {
    fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix>;

    /// Pure eval-mode forward; touches no caches.
    fn predict(&self, x: &Matrix) -> Result<Matrix>;

    /// Gradient w.r.t. the input for the most recent `forward`. When
    /// `accumulate_params` is set, parameter gradients are added into the
    /// layer's buffers as well.
    fn backward(&mut self, upstream: &Matrix, accumulate_params: bool) -> Result<Matrix>;

    /// Mutable (parameter, gradient-buffer) pairs, in a stable order.
    fn param_grad_pairs(&mut self) -> Vec<(&mut Matrix, &mut Matrix)> {
        Vec::new()
    }

    fn params(&self) -> Vec<&Matrix> {
        Vec::new()
    }

    fn zero_grads(&mut self) {}

    /// Epoch boundary hook for layers with schedule-dependent behaviour.
    fn on_epoch(&mut self, _epoch: u64) {}

    fn clone_layer(&self) -> Box<dyn Layer>;
}

impl Clone for Box<dyn Layer> {
    fn clone(&self) -> Self {
        self.clone_layer()
    }
}

pub(crate) fn ordering_error(layer: &str) -> Error {
    Error::Ordering(format!("{layer}: backward called before forward"))
}

/// Ordered composition of layers: forward in order, backward in reverse.
#[derive(Debug, Clone, Default)]
pub struct Sequential {
    layers: Vec<Box<dyn Layer>>,
}

impl Sequential {
    pub fn new(layers: Vec<Box<dyn Layer>>) -> Self {
        Sequential { layers }
    }

    pub fn push(&mut self, layer: Box<dyn Layer>) {
        self.layers.push(layer);
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layers(&self) -> &[Box<dyn Layer>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Box<dyn Layer>] {
        &mut self.layers
    }

    /// Apply one optimizer update to every parameter from its gradient
    /// buffer, then clear the buffers.
    pub fn apply_optimizer(&mut self, opt: &mut Optimizer) -> Result<()> {
        let mut slot = 0;
        for layer in &mut self.layers {
            for (param, grad) in layer.param_grad_pairs() {
                opt.step(slot, param, grad)?;
                slot += 1;
            }
        }
        self.zero_grads();
        Ok(())
    }

    pub fn param_fingerprint(&self) -> u64 {
        let mut h: u64 = 0x1000_0001b3;
        for layer in &self.layers {
            for p in layer.params() {
                h = h.rotate_left(13) ^ p.fingerprint();
            }
        }
        h
    }
}

impl Layer for Sequential {
    fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward(&cur, mode)?;
        }
        Ok(cur)
    }

    fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.predict(&cur)?;
        }
        Ok(cur)
    }

    fn backward(&mut self, upstream: &Matrix, accumulate_params: bool) -> Result<Matrix> {
        let mut grad = upstream.clone();
        for layer in self.layers.iter_mut().rev() {
            grad = layer.backward(&grad, accumulate_params)?;
        }
        Ok(grad)
    }

    fn param_grad_pairs(&mut self) -> Vec<(&mut Matrix, &mut Matrix)> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.param_grad_pairs())
            .collect()
    }

    fn params(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn zero_grads(&mut self) {
        for layer in &mut self.layers {
            layer.zero_grads();
        }
    }

    fn on_epoch(&mut self, epoch: u64) {
        for layer in &mut self.layers {
            layer.on_epoch(epoch);
        }
    }

    fn clone_layer(&self) -> Box<dyn Layer> {
        Box::new(self.clone())
    }
}
