use crate::error::{Error, Result};
use crate::kaku::{Assessment, Io};
use crate::numerics::{softmax_cross_entropy, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriterionKind {
    /// Sum of squared errors; with weight 0.5 its gradient is exactly `y − t`.
    Sse,
    Mse,
    /// Softmax cross-entropy against a `[batch, 1]` column of class indices.
    CrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
    /// Keep the per-element matrix for diagnostics; the scalar assessment is
    /// then its mean.
    None,
}

/// A loss criterion: kind, reduction, and a scalar weight applied last.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Criterion {
    pub kind: CriterionKind,
    pub reduction: Reduction,
    pub weight: f64,
}

impl Criterion {
    /// Sum of squared errors scaled by one half.
    pub fn sse() -> Self {
        Criterion {
            kind: CriterionKind::Sse,
            reduction: Reduction::Sum,
            weight: 0.5,
        }
    }

    pub fn mse() -> Self {
        Criterion {
            kind: CriterionKind::Mse,
            reduction: Reduction::Mean,
            weight: 1.0,
        }
    }

    pub fn cross_entropy() -> Self {
        Criterion {
            kind: CriterionKind::CrossEntropy,
            reduction: Reduction::Mean,
            weight: 1.0,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_reduction(mut self, reduction: Reduction) -> Self {
        self.reduction = reduction;
        self
    }

    fn labels_of(t: &Matrix) -> Result<Vec<usize>> {
        if t.cols() != 1 {
            return Err(Error::shape(
                "cross_entropy targets",
                t.shape_str(),
                "[batch, 1] class indices",
            ));
        }
        Ok(t.data().iter().map(|&v| v as usize).collect())
    }

    /// Per-element (squared error) or per-row (cross-entropy) loss values
    /// before reduction and weighting.
    pub fn per_element(&self, y: &Matrix, t: &Matrix) -> Result<Matrix> {
        match self.kind {
            CriterionKind::Sse | CriterionKind::Mse => {
                let d = y.sub(t)?;
                Ok(d.map(|v| v * v))
            }
            CriterionKind::CrossEntropy => {
                let labels = Self::labels_of(t)?;
                let probs = crate::numerics::softmax(y);
                let mut out = Matrix::zeros(y.rows(), 1);
                for (i, &l) in labels.iter().enumerate() {
                    if l >= y.cols() {
                        return Err(Error::IndexOutOfRange {
                            what: "class label",
                            index: l,
                            bound: y.cols(),
                        });
                    }
                    out.set(i, 0, -probs.get(i, l).max(1e-300).ln());
                }
                Ok(out)
            }
        }
    }

    pub fn evaluate(&self, y: &Matrix, t: &Matrix) -> Result<f64> {
        let per = self.per_element(y, t)?;
        let reduced = match self.reduction {
            Reduction::Sum => per.sum(),
            Reduction::Mean | Reduction::None => per.mean(),
        };
        Ok(self.weight * reduced)
    }

    /// Gradient of [`Criterion::evaluate`] with respect to `y`.
    pub fn gradient(&self, y: &Matrix, t: &Matrix) -> Result<Matrix> {
        match self.kind {
            CriterionKind::Sse | CriterionKind::Mse => {
                let mut g = y.sub(t)?.scale(2.0 * self.weight);
                if matches!(self.reduction, Reduction::Mean | Reduction::None) {
                    g.scale_assign(1.0 / (y.rows() * y.cols()) as f64);
                }
                Ok(g)
            }
            CriterionKind::CrossEntropy => {
                let labels = Self::labels_of(t)?;
                let (_, mut g) = softmax_cross_entropy(y, &labels)?;
                // softmax_cross_entropy already divides by the batch
                match self.reduction {
                    Reduction::Sum => g.scale_assign(y.rows() as f64),
                    Reduction::Mean | Reduction::None => {}
                }
                g.scale_assign(self.weight);
                Ok(g)
            }
        }
    }

    /// Assess an output against a target; all three kinds are costs.
    pub fn assess(&self, y: &Io, t: &Io) -> Result<Assessment> {
        Ok(Assessment::cost(self.evaluate(y.single(), t.single())?))
    }
}
