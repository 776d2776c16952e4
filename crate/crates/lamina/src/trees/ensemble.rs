use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::trees::{fit_classification, CartConfig, CartTree, MultiOutputTrees};

/// What the ensemble refits on each update.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorSpec {
    pub config: CartConfig,
    pub kind: EstimatorKind,
}

#[derive(Debug, Clone, Copy)]
pub enum EstimatorKind {
    /// Multi-output regression with the given output width.
    Regression { outputs: usize },
    Classification { classes: usize },
}

#[derive(Debug, Clone)]
pub enum TreeEstimator {
    Regressor(MultiOutputTrees),
    Classifier(CartTree),
}

#[derive(Debug, Clone)]
pub enum EnsembleTargets<'a> {
    Regression(&'a Matrix),
    Classification(&'a [usize]),
}

/// Capacity-bounded FIFO of freshly fitted estimators: each update drops the
/// oldest member once the ensemble is full, fits a new estimator on the
/// minibatch, and appends it. Later minibatches therefore dominate the
/// ensemble while a short memory of earlier ones persists.
#[derive(Debug, Clone)]
pub struct TemporalEnsemble {
    capacity: usize,
    spec: EstimatorSpec,
    members: VecDeque<TreeEstimator>,
}

impl TemporalEnsemble {
    pub fn new(capacity: usize, spec: EstimatorSpec) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("ensemble capacity must be at least 1".into()));
        }
        Ok(TemporalEnsemble {
            capacity,
            spec,
            members: VecDeque::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn spec(&self) -> &EstimatorSpec {
        &self.spec
    }

    /// Members in insertion order, oldest first.
    pub fn members(&self) -> impl Iterator<Item = &TreeEstimator> {
        self.members.iter()
    }

    /// Drop the oldest member if full, fit a fresh estimator on `(x, t)`,
    /// append it.
    pub fn update(&mut self, x: &Matrix, t: &EnsembleTargets) -> Result<()> {
        if self.members.len() == self.capacity {
            self.members.pop_front();
        }
        let fitted = match (&self.spec.kind, t) {
            (EstimatorKind::Regression { outputs }, EnsembleTargets::Regression(targets)) => {
                if targets.cols() != *outputs {
                    return Err(Error::shape(
                        "ensemble_update",
                        targets.shape_str(),
                        format!("{} outputs", outputs),
                    ));
                }
                TreeEstimator::Regressor(MultiOutputTrees::fit(x, targets, self.spec.config)?)
            }
            (EstimatorKind::Classification { classes }, EnsembleTargets::Classification(labels)) => {
                TreeEstimator::Classifier(fit_classification(
                    x,
                    labels,
                    *classes,
                    self.spec.config,
                )?)
            }
            _ => {
                return Err(Error::Config(
                    "ensemble target kind does not match its estimator kind".into(),
                ))
            }
        };
        self.members.push_back(fitted);
        Ok(())
    }

    /// Member mean for regression; per-class vote shares for classification
    /// (the majority class is the per-row argmax).
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        if self.members.is_empty() {
            return Err(Error::EmptyInput("prediction from an empty ensemble".into()));
        }
        let m = self.members.len() as f64;
        match self.spec.kind {
            EstimatorKind::Regression { outputs } => {
                let mut out = Matrix::zeros(x.rows(), outputs);
                for member in &self.members {
                    let TreeEstimator::Regressor(trees) = member else {
                        return Err(Error::Config("mixed ensemble members".into()));
                    };
                    out.add_assign(&trees.predict(x)?)?;
                }
                out.scale_assign(1.0 / m);
                Ok(out)
            }
            EstimatorKind::Classification { classes } => {
                let mut out = Matrix::zeros(x.rows(), classes);
                for member in &self.members {
                    let TreeEstimator::Classifier(tree) = member else {
                        return Err(Error::Config("mixed ensemble members".into()));
                    };
                    for (i, class) in tree.predict_classes(x)?.into_iter().enumerate() {
                        out.set(i, class, out.get(i, class) + 1.0 / m);
                    }
                }
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn regression_spec(outputs: usize) -> EstimatorSpec {
        EstimatorSpec {
            config: CartConfig::with_max_depth(3),
            kind: EstimatorKind::Regression { outputs },
        }
    }

    #[test]
    fn capacity_drops_the_oldest_member() {
        // fit on constant targets k so each member is identifiable by its
        // prediction; after 10 updates at capacity 9 the first tree is gone
        let mut ensemble = TemporalEnsemble::new(9, regression_spec(1)).unwrap();
        let x = Matrix::from_rows(&[&[0.0], &[1.0]]).unwrap();
        for k in 0..10 {
            let t = Matrix::filled(2, 1, k as f64);
            ensemble.update(&x, &EnsembleTargets::Regression(&t)).unwrap();
        }
        assert_eq!(ensemble.len(), 9);
        let first_prediction = match ensemble.members().next().unwrap() {
            TreeEstimator::Regressor(trees) => trees.predict(&x).unwrap().get(0, 0),
            _ => unreachable!(),
        };
        // member fitted on k = 0 is absent; the oldest survivor saw k = 1
        assert_eq!(first_prediction, 1.0);
        // mean of 1..=9
        let mean = ensemble.predict(&x).unwrap().get(0, 0);
        assert!((mean - 5.0).abs() < 1e-12);
    }

    #[test]
    fn one_update_gives_size_one() {
        let mut ensemble = TemporalEnsemble::new(9, regression_spec(1)).unwrap();
        let x = Matrix::from_rows(&[&[0.0]]).unwrap();
        let t = Matrix::filled(1, 1, 3.0);
        ensemble.update(&x, &EnsembleTargets::Regression(&t)).unwrap();
        assert_eq!(ensemble.len(), 1);
        assert_eq!(ensemble.predict(&x).unwrap().get(0, 0), 3.0);
    }

    #[test]
    fn members_stay_in_fit_order_below_capacity() {
        let mut ensemble = TemporalEnsemble::new(9, regression_spec(1)).unwrap();
        let x = Matrix::from_rows(&[&[0.0]]).unwrap();
        for k in 0..5 {
            let t = Matrix::filled(1, 1, k as f64);
            ensemble.update(&x, &EnsembleTargets::Regression(&t)).unwrap();
        }
        let predictions: Vec<f64> = ensemble
            .members()
            .map(|m| match m {
                TreeEstimator::Regressor(trees) => trees.predict(&x).unwrap().get(0, 0),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(predictions, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn empty_ensemble_prediction_errors() {
        let ensemble = TemporalEnsemble::new(3, regression_spec(1)).unwrap();
        let x = Matrix::from_rows(&[&[0.0]]).unwrap();
        assert!(matches!(
            ensemble.predict(&x),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn classification_votes_match_brute_force_count() {
        let spec = EstimatorSpec {
            config: CartConfig::with_max_depth(2),
            kind: EstimatorKind::Classification { classes: 3 },
        };
        let mut ensemble = TemporalEnsemble::new(5, spec).unwrap();
        // three members trained on conflicting constant labelings: 1, 1, 2
        let x = Matrix::from_rows(&[&[0.0], &[1.0]]).unwrap();
        for labels in [[1usize, 1], [1, 1], [2, 2]] {
            ensemble
                .update(&x, &EnsembleTargets::Classification(&labels))
                .unwrap();
        }
        let votes = ensemble.predict(&x).unwrap();
        // row 0: two votes class 1, one vote class 2 → majority class 1
        assert_eq!(votes.argmax_row(0), 1);
        assert!((votes.get(0, 1) - 2.0 / 3.0).abs() < 1e-12);
        assert!((votes.get(0, 2) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unanimous_members_return_their_value() {
        let mut rng = Rng::new(91);
        let mut ensemble = TemporalEnsemble::new(4, regression_spec(2)).unwrap();
        let x = rng.gaussian(8, 3, 0.0, 1.0);
        let t = rng.gaussian(8, 2, 0.0, 1.0);
        for _ in 0..4 {
            ensemble.update(&x, &EnsembleTargets::Regression(&t)).unwrap();
        }
        // identical training data → identical trees → the mean is any member
        let member = match ensemble.members().next().unwrap() {
            TreeEstimator::Regressor(trees) => trees.predict(&x).unwrap(),
            _ => unreachable!(),
        };
        let mean = ensemble.predict(&x).unwrap();
        for (a, b) in mean.data().iter().zip(member.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
