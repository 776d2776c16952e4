use crate::error::Result;
use crate::layers::{ordering_error, Layer, Mode};
use crate::numerics::{Matrix, Rng};

/// Affine map `y = x · Wᵀ + b` with weights stored `[out, in]`.
#[derive(Debug, Clone)]
pub struct LinearLayer {
    w: Matrix,
    b: Matrix,
    grad_w: Matrix,
    grad_b: Matrix,
    cached_x: Option<Matrix>,
}

impl LinearLayer {
    /// Kaiming-uniform fan-in initialization for the weights, zero bias.
    pub fn new(in_features: usize, out_features: usize, rng: &mut Rng) -> Self {
        let bound = (6.0 / in_features as f64).sqrt();
        LinearLayer {
            w: rng.uniform_matrix(out_features, in_features, -bound, bound),
            b: Matrix::zeros(1, out_features),
            grad_w: Matrix::zeros(out_features, in_features),
            grad_b: Matrix::zeros(1, out_features),
            cached_x: None,
        }
    }

    pub fn from_parts(w: Matrix, b: Matrix) -> Self {
        let (grad_w, grad_b) = (
            Matrix::zeros(w.rows(), w.cols()),
            Matrix::zeros(b.rows(), b.cols()),
        );
        LinearLayer {
            w,
            b,
            grad_w,
            grad_b,
            cached_x: None,
        }
    }

    pub fn weights(&self) -> &Matrix {
        &self.w
    }

    pub fn bias(&self) -> &Matrix {
        &self.b
    }

    pub fn in_features(&self) -> usize {
        self.w.cols()
    }

    pub fn out_features(&self) -> usize {
        self.w.rows()
    }

    pub fn cached_input(&self) -> Option<&Matrix> {
        self.cached_x.as_ref()
    }
}

impl Layer for LinearLayer {
    fn forward(&mut self, x: &Matrix, _mode: Mode) -> Result<Matrix> {
        let y = x.matmul_nt(&self.w)?.add_row_broadcast(&self.b)?;
        self.cached_x = Some(x.clone());
        Ok(y)
    }

    fn predict(&self, x: &Matrix) -> Result<Matrix> {
        x.matmul_nt(&self.w)?.add_row_broadcast(&self.b)
    }

    fn backward(&mut self, upstream: &Matrix, accumulate_params: bool) -> Result<Matrix> {
        let x = self.cached_x.as_ref().ok_or_else(|| ordering_error("linear"))?;
        if accumulate_params {
            // dW = dyᵀ · x, db = column sums of dy
            self.grad_w.add_assign(&upstream.matmul_tn(x)?)?;
            self.grad_b.add_assign(&upstream.col_sum())?;
        }
        upstream.matmul(&self.w)
    }

    fn param_grad_pairs(&mut self) -> Vec<(&mut Matrix, &mut Matrix)> {
        vec![(&mut self.w, &mut self.grad_w), (&mut self.b, &mut self.grad_b)]
    }

    fn params(&self) -> Vec<&Matrix> {
        vec![&self.w, &self.b]
    }

    fn zero_grads(&mut self) {
        self.grad_w.scale_assign(0.0);
        self.grad_b.scale_assign(0.0);
    }

    fn clone_layer(&self) -> Box<dyn Layer> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_weights_pass_input_through() {
        let mut layer = LinearLayer::from_parts(Matrix::identity(3), Matrix::zeros(1, 3));
        let x = Matrix::from_rows(&[&[1.0, -2.0, 3.0]]).unwrap();
        let y = layer.forward(&x, Mode::Train).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn scalar_chain_rule() {
        let mut layer = LinearLayer::from_parts(Matrix::filled(1, 1, 3.0), Matrix::zeros(1, 1));
        let x = Matrix::filled(1, 1, 2.0);
        layer.forward(&x, Mode::Train).unwrap();
        let dx = layer.backward(&Matrix::filled(1, 1, 1.0), true).unwrap();
        assert_abs_diff_eq!(dx.get(0, 0), 3.0);
    }

    #[test]
    fn zero_upstream_leaves_buffers_untouched() {
        let mut rng = Rng::new(1);
        let mut layer = LinearLayer::new(4, 3, &mut rng);
        let x = rng.gaussian(2, 4, 0.0, 1.0);
        layer.forward(&x, Mode::Train).unwrap();
        let dx = layer.backward(&Matrix::zeros(2, 3), true).unwrap();
        assert!(dx.data().iter().all(|&v| v == 0.0));
        assert!(layer.grad_w.data().iter().all(|&v| v == 0.0));
        assert!(layer.grad_b.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_before_forward_is_an_ordering_error() {
        let mut rng = Rng::new(2);
        let mut layer = LinearLayer::new(2, 2, &mut rng);
        assert!(layer.backward(&Matrix::zeros(1, 2), true).is_err());
    }

    #[test]
    fn repeated_backward_accumulates() {
        let mut rng = Rng::new(3);
        let mut layer = LinearLayer::new(2, 2, &mut rng);
        let x = rng.gaussian(3, 2, 0.0, 1.0);
        let dy = rng.gaussian(3, 2, 0.0, 1.0);
        layer.forward(&x, Mode::Train).unwrap();
        layer.backward(&dy, true).unwrap();
        let once = layer.grad_w.clone();
        layer.backward(&dy, true).unwrap();
        for (twice, one) in layer.grad_w.data().iter().zip(once.data()) {
            assert_abs_diff_eq!(*twice, 2.0 * one, epsilon = 1e-12);
        }
    }
}
