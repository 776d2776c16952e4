use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::trees::{fit_regression, CartConfig, CartTree};

/// Multi-output regression as independent single-output trees: column j of
/// the prediction is exactly the tree fitted on target column j.
#[derive(Debug, Clone)]
pub struct MultiOutputTrees {
    trees: Vec<CartTree>,
}

impl MultiOutputTrees {
    pub fn fit(data: &Matrix, targets: &Matrix, config: CartConfig) -> Result<Self> {
        if data.rows() != targets.rows() {
            return Err(Error::shape(
                "MultiOutputTrees::fit",
                data.shape_str(),
                targets.shape_str(),
            ));
        }
        let trees = (0..targets.cols())
            .into_par_iter()
            .map(|j| fit_regression(data, &targets.col(j), config))
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiOutputTrees { trees })
    }

    pub fn outputs(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[CartTree] {
        &self.trees
    }

    pub fn predict(&self, data: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(data.rows(), self.trees.len());
        for (j, tree) in self.trees.iter().enumerate() {
            let col = tree.predict_regression(data)?;
            for i in 0..data.rows() {
                out.set(i, j, col.get(i, 0));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn columns_match_individually_fitted_trees() {
        let mut rng = Rng::new(81);
        let data = rng.gaussian(30, 4, 0.0, 1.0);
        let targets = rng.gaussian(30, 3, 0.0, 1.0);
        let config = CartConfig::with_max_depth(3);
        let multi = MultiOutputTrees::fit(&data, &targets, config).unwrap();
        let probe = rng.gaussian(10, 4, 0.0, 1.0);
        let got = multi.predict(&probe).unwrap();
        for j in 0..3 {
            let single = fit_regression(&data, &targets.col(j), config).unwrap();
            let want = single.predict_regression(&probe).unwrap();
            for i in 0..10 {
                assert_eq!(got.get(i, j), want.get(i, 0), "column {j}");
            }
        }
    }
}
