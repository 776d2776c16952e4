use crate::error::{Error, Result};
use crate::layers::{ordering_error, Layer, Mode};
use crate::numerics::{Matrix, Rng};

/// Inverted dropout: in train mode each unit is dropped with probability `p`
/// and the kept units are scaled by `1/(1−p)`, so the expected output equals
/// the input. Eval mode is the identity.
#[derive(Debug, Clone)]
pub struct DropoutLayer {
    p: f64,
    base_p: f64,
    /// Linear per-epoch decay of the drop probability; 0 keeps it fixed.
    decay: f64,
    rng: Rng,
    mask: Option<Matrix>,
    last_mode: Option<Mode>,
}

impl DropoutLayer {
    pub fn new(p: f64, rng: Rng) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!(
                "dropout probability must be in [0, 1), got {p}"
            )));
        }
        Ok(DropoutLayer {
            p,
            base_p: p,
            decay: 0.0,
            rng,
            mask: None,
            last_mode: None,
        })
    }

    pub fn with_decay(mut self, decay: f64) -> Self {
        self.decay = decay;
        self
    }

    pub fn probability(&self) -> f64 {
        self.p
    }

    pub fn set_probability(&mut self, p: f64) -> Result<()> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!(
                "dropout probability must be in [0, 1), got {p}"
            )));
        }
        self.p = p;
        Ok(())
    }
}

impl Layer for DropoutLayer {
    fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        self.last_mode = Some(mode);
        match mode {
            Mode::Eval => {
                self.mask = None;
                Ok(x.clone())
            }
            Mode::Train => {
                let keep_scale = 1.0 / (1.0 - self.p);
                let mask = Matrix::from_fn(x.rows(), x.cols(), |_, _| {
                    if self.rng.uniform() >= self.p {
                        keep_scale
                    } else {
                        0.0
                    }
                });
                let y = x.hadamard(&mask)?;
                self.mask = Some(mask);
                Ok(y)
            }
        }
    }

    fn predict(&self, x: &Matrix) -> Result<Matrix> {
        Ok(x.clone())
    }

    fn backward(&mut self, upstream: &Matrix, _accumulate_params: bool) -> Result<Matrix> {
        match (self.last_mode, &self.mask) {
            (Some(Mode::Train), Some(mask)) => upstream.hadamard(mask),
            // eval-mode forward was the identity
            (Some(Mode::Eval), _) => Ok(upstream.clone()),
            _ => Err(ordering_error("dropout")),
        }
    }

    fn on_epoch(&mut self, epoch: u64) {
        if self.decay > 0.0 {
            self.p = (self.base_p - self.decay * epoch as f64).max(0.0);
        }
    }

    fn clone_layer(&self) -> Box<dyn Layer> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_probability_is_identity_in_train_mode() {
        let mut layer = DropoutLayer::new(0.0, Rng::new(1)).unwrap();
        let x = Matrix::filled(3, 3, 2.0);
        let y = layer.forward(&x, Mode::Train).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn eval_mode_is_identity() {
        let mut layer = DropoutLayer::new(0.7, Rng::new(1)).unwrap();
        let x = Matrix::filled(2, 4, -1.5);
        assert_eq!(layer.forward(&x, Mode::Eval).unwrap(), x);
    }

    #[test]
    fn kept_fraction_matches_probability() {
        // 1e5 units at p = 0.3: kept fraction within 0.7 ± 0.01
        let mut layer = DropoutLayer::new(0.3, Rng::new(77)).unwrap();
        let x = Matrix::filled(1000, 100, 1.0);
        let y = layer.forward(&x, Mode::Train).unwrap();
        let kept = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / 1e5;
        assert!((kept - 0.7).abs() < 0.01, "kept fraction {kept}");
    }

    #[test]
    fn kept_units_scaled_to_preserve_expectation() {
        let mut layer = DropoutLayer::new(0.5, Rng::new(3)).unwrap();
        let x = Matrix::filled(100, 100, 1.0);
        let y = layer.forward(&x, Mode::Train).unwrap();
        for &v in y.data() {
            assert!(v == 0.0 || (v - 2.0).abs() < 1e-12);
        }
        // expectation preserved to sampling noise
        assert!((y.mean() - 1.0).abs() < 0.05);
    }

    #[test]
    fn invalid_probability_rejected() {
        assert!(DropoutLayer::new(1.0, Rng::new(1)).is_err());
        assert!(DropoutLayer::new(-0.1, Rng::new(1)).is_err());
    }
}
