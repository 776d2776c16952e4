use crate::error::{Error, Result};
use crate::layers::{ordering_error, Layer, Mode};
use crate::numerics::Matrix;

/// 1-D batch normalization over the feature dimension.
///
/// Train mode normalizes with the current batch's mean and biased variance,
/// then applies the learned affine transform; running statistics are updated
/// with momentum for eval mode, which is deterministic and uses them
/// exclusively.
#[derive(Debug, Clone)]
pub struct BatchNormLayer {
    gamma: Matrix,
    beta: Matrix,
    grad_gamma: Matrix,
    grad_beta: Matrix,
    running_mean: Matrix,
    running_var: Matrix,
    momentum: f64,
    eps: f64,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    x_hat: Matrix,
    inv_std: Matrix,
    mode: Mode,
}

impl BatchNormLayer {
    pub fn new(features: usize) -> Self {
        BatchNormLayer {
            gamma: Matrix::filled(1, features, 1.0),
            beta: Matrix::zeros(1, features),
            grad_gamma: Matrix::zeros(1, features),
            grad_beta: Matrix::zeros(1, features),
            running_mean: Matrix::zeros(1, features),
            running_var: Matrix::filled(1, features, 1.0),
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.cols()
    }

    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.features() {
            return Err(Error::shape(
                "batchnorm",
                x.shape_str(),
                format!("features {}", self.features()),
            ));
        }
        Ok(())
    }
}

impl Layer for BatchNormLayer {
    fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        self.check_width(x)?;
        let f = self.features();
        let (mean, var) = match mode {
            Mode::Train => {
                let mean = x.col_mean();
                let centered = x.add_row_broadcast(&mean.scale(-1.0))?;
                let var = centered.map(|v| v * v).col_mean();
                for j in 0..f {
                    let rm = (1.0 - self.momentum) * self.running_mean.get(0, j)
                        + self.momentum * mean.get(0, j);
                    let rv = (1.0 - self.momentum) * self.running_var.get(0, j)
                        + self.momentum * var.get(0, j);
                    self.running_mean.set(0, j, rm);
                    self.running_var.set(0, j, rv);
                }
                (mean, var)
            }
            Mode::Eval => (self.running_mean.clone(), self.running_var.clone()),
        };

        let inv_std = var.map(|v| 1.0 / (v + self.eps).sqrt());
        let mut x_hat = x.add_row_broadcast(&mean.scale(-1.0))?;
        for i in 0..x_hat.rows() {
            for (v, s) in x_hat.row_mut(i).iter_mut().zip(inv_std.data()) {
                *v *= s;
            }
        }
        let mut y = x_hat.clone();
        for i in 0..y.rows() {
            let row = y.row_mut(i);
            for j in 0..f {
                row[j] = row[j] * self.gamma.get(0, j) + self.beta.get(0, j);
            }
        }
        self.cache = Some(BnCache { x_hat, inv_std, mode });
        Ok(y)
    }

    fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.check_width(x)?;
        let f = self.features();
        let mut y = x.clone();
        for i in 0..y.rows() {
            let row = y.row_mut(i);
            for j in 0..f {
                let inv_std = 1.0 / (self.running_var.get(0, j) + self.eps).sqrt();
                let x_hat = (row[j] - self.running_mean.get(0, j)) * inv_std;
                row[j] = x_hat * self.gamma.get(0, j) + self.beta.get(0, j);
            }
        }
        Ok(y)
    }

    fn backward(&mut self, upstream: &Matrix, accumulate_params: bool) -> Result<Matrix> {
        let cache = self.cache.as_ref().ok_or_else(|| ordering_error("batchnorm"))?;
        if upstream.shape() != cache.x_hat.shape() {
            return Err(Error::shape(
                "batchnorm backward",
                upstream.shape_str(),
                cache.x_hat.shape_str(),
            ));
        }
        let b = upstream.rows() as f64;
        let f = self.features();

        let dgamma = upstream.hadamard(&cache.x_hat)?.col_sum();
        let dbeta = upstream.col_sum();
        if accumulate_params {
            self.grad_gamma.add_assign(&dgamma)?;
            self.grad_beta.add_assign(&dbeta)?;
        }

        match cache.mode {
            Mode::Train => {
                // dx = γ·inv_std/b · (b·dy − Σdy − x̂·Σ(dy·x̂)), per feature
                let mut dx = Matrix::zeros(upstream.rows(), f);
                for i in 0..upstream.rows() {
                    for j in 0..f {
                        let term = b * upstream.get(i, j)
                            - dbeta.get(0, j)
                            - cache.x_hat.get(i, j) * dgamma.get(0, j);
                        dx.set(
                            i,
                            j,
                            self.gamma.get(0, j) * cache.inv_std.get(0, j) / b * term,
                        );
                    }
                }
                Ok(dx)
            }
            Mode::Eval => {
                // running statistics are constants in eval mode
                let mut dx = upstream.clone();
                for i in 0..dx.rows() {
                    let row = dx.row_mut(i);
                    for j in 0..f {
                        row[j] *= self.gamma.get(0, j) * cache.inv_std.get(0, j);
                    }
                }
                Ok(dx)
            }
        }
    }

    fn param_grad_pairs(&mut self) -> Vec<(&mut Matrix, &mut Matrix)> {
        vec![
            (&mut self.gamma, &mut self.grad_gamma),
            (&mut self.beta, &mut self.grad_beta),
        ]
    }

    fn params(&self) -> Vec<&Matrix> {
        vec![&self.gamma, &self.beta]
    }

    fn zero_grads(&mut self) {
        self.grad_gamma.scale_assign(0.0);
        self.grad_beta.scale_assign(0.0);
    }

    fn clone_layer(&self) -> Box<dyn Layer> {
        Box::new(self.clone())
    }
}
