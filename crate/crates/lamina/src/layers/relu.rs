use crate::error::Result;
use crate::layers::{ordering_error, Layer, Mode};
use crate::numerics::Matrix;

/// Rectified linear unit. Backward multiplies the upstream gradient by the
/// cached `x > 0` mask exactly.
#[derive(Debug, Clone, Default)]
pub struct ReluLayer {
    mask: Option<Matrix>,
}

impl ReluLayer {
    pub fn new() -> Self {
        ReluLayer { mask: None }
    }
}

impl Layer for ReluLayer {
    fn forward(&mut self, x: &Matrix, _mode: Mode) -> Result<Matrix> {
        self.mask = Some(x.map(|v| if v > 0.0 { 1.0 } else { 0.0 }));
        Ok(x.map(|v| v.max(0.0)))
    }

    fn predict(&self, x: &Matrix) -> Result<Matrix> {
        Ok(x.map(|v| v.max(0.0)))
    }

    fn backward(&mut self, upstream: &Matrix, _accumulate_params: bool) -> Result<Matrix> {
        let mask = self.mask.as_ref().ok_or_else(|| ordering_error("relu"))?;
        upstream.hadamard(mask)
    }

    fn clone_layer(&self) -> Box<dyn Layer> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clips_negatives_and_zero() {
        let mut layer = ReluLayer::new();
        let x = Matrix::from_rows(&[&[-1.0, 0.0, 2.0]]).unwrap();
        let y = layer.forward(&x, Mode::Train).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn backward_applies_cached_mask() {
        let mut layer = ReluLayer::new();
        let x = Matrix::from_rows(&[&[-1.0, 0.5, 2.0]]).unwrap();
        layer.forward(&x, Mode::Train).unwrap();
        let dx = layer.backward(&Matrix::filled(1, 3, 4.0), true).unwrap();
        assert_eq!(dx.data(), &[0.0, 4.0, 4.0]);
    }
}
