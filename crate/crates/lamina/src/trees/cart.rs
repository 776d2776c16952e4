use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Greedy binary CART tree. Regression splits minimize the summed squared
/// error of the children (weighted variance); classification splits minimize
/// weighted Gini impurity. Thresholds are midpoints between consecutive
/// distinct sorted feature values, ties broken toward the lowest feature
/// index and then the lowest threshold, so fitting is fully deterministic.
#[derive(Debug, Clone)]
pub struct CartTree {
    root: TreeNode,
    features: usize,
}

#[derive(Debug, Clone)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: LeafValue,
    },
}

#[derive(Debug, Clone)]
pub enum LeafValue {
    Mean(f64),
    /// Class shares of the training samples that reached the leaf.
    ClassProbs(Vec<f64>),
}

#[derive(Debug, Clone, Copy)]
pub struct CartConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for CartConfig {
    fn default() -> Self {
        CartConfig {
            max_depth: 10,
            min_samples_split: 2,
        }
    }
}

impl CartConfig {
    pub fn with_max_depth(max_depth: usize) -> Self {
        CartConfig {
            max_depth,
            ..Default::default()
        }
    }
}

enum Targets<'a> {
    Regression(&'a [f64]),
    Classification { labels: &'a [usize], classes: usize },
}

pub fn fit_regression(data: &Matrix, targets: &[f64], config: CartConfig) -> Result<CartTree> {
    if data.rows() == 0 {
        return Err(Error::EmptyInput("tree fit on empty data".into()));
    }
    if targets.len() != data.rows() {
        return Err(Error::shape(
            "fit_regression",
            data.shape_str(),
            format!("{} targets", targets.len()),
        ));
    }
    let builder = Builder {
        data,
        targets: Targets::Regression(targets),
        config,
    };
    Ok(CartTree {
        root: builder.build((0..data.rows()).collect(), 0),
        features: data.cols(),
    })
}

pub fn fit_classification(
    data: &Matrix,
    labels: &[usize],
    classes: usize,
    config: CartConfig,
) -> Result<CartTree> {
    if data.rows() == 0 {
        return Err(Error::EmptyInput("tree fit on empty data".into()));
    }
    if labels.len() != data.rows() {
        return Err(Error::shape(
            "fit_classification",
            data.shape_str(),
            format!("{} labels", labels.len()),
        ));
    }
    for &l in labels {
        if l >= classes {
            return Err(Error::IndexOutOfRange {
                what: "class label",
                index: l,
                bound: classes,
            });
        }
    }
    let builder = Builder {
        data,
        targets: Targets::Classification { labels, classes },
        config,
    };
    Ok(CartTree {
        root: builder.build((0..data.rows()).collect(), 0),
        features: data.cols(),
    })
}

impl CartTree {
    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn depth(&self) -> usize {
        fn depth_of(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + depth_of(left).max(depth_of(right)),
            }
        }
        depth_of(&self.root)
    }

    pub fn leaf_for(&self, row: &[f64]) -> &LeafValue {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Regression predictions as a `[rows, 1]` column.
    pub fn predict_regression(&self, data: &Matrix) -> Result<Matrix> {
        self.check_features(data)?;
        let mut out = Matrix::zeros(data.rows(), 1);
        for i in 0..data.rows() {
            match self.leaf_for(data.row(i)) {
                LeafValue::Mean(v) => out.set(i, 0, *v),
                LeafValue::ClassProbs(_) => {
                    return Err(Error::Config(
                        "regression prediction from a classification tree".into(),
                    ))
                }
            }
        }
        Ok(out)
    }

    /// Majority class per row (ties toward the lowest class index).
    pub fn predict_classes(&self, data: &Matrix) -> Result<Vec<usize>> {
        self.check_features(data)?;
        let mut out = Vec::with_capacity(data.rows());
        for i in 0..data.rows() {
            match self.leaf_for(data.row(i)) {
                LeafValue::ClassProbs(p) => {
                    let mut best = 0;
                    for (c, &v) in p.iter().enumerate() {
                        if v > p[best] {
                            best = c;
                        }
                    }
                    out.push(best);
                }
                LeafValue::Mean(_) => {
                    return Err(Error::Config(
                        "class prediction from a regression tree".into(),
                    ))
                }
            }
        }
        Ok(out)
    }

    fn check_features(&self, data: &Matrix) -> Result<()> {
        if data.cols() != self.features {
            return Err(Error::shape(
                "tree predict",
                data.shape_str(),
                format!("{} features", self.features),
            ));
        }
        Ok(())
    }
}

struct Builder<'a> {
    data: &'a Matrix,
    targets: Targets<'a>,
    config: CartConfig,
}

impl<'a> Builder<'a> {
    fn leaf(&self, indices: &[usize]) -> TreeNode {
        let value = match &self.targets {
            Targets::Regression(y) => {
                let sum: f64 = indices.iter().map(|&i| y[i]).sum();
                LeafValue::Mean(sum / indices.len() as f64)
            }
            Targets::Classification { labels, classes } => {
                let mut counts = vec![0.0; *classes];
                for &i in indices {
                    counts[labels[i]] += 1.0;
                }
                let n = indices.len() as f64;
                LeafValue::ClassProbs(counts.into_iter().map(|c| c / n).collect())
            }
        };
        TreeNode::Leaf { value }
    }

    fn is_pure(&self, indices: &[usize]) -> bool {
        match &self.targets {
            Targets::Regression(y) => {
                let first = y[indices[0]];
                indices.iter().all(|&i| y[i] == first)
            }
            Targets::Classification { labels, .. } => {
                let first = labels[indices[0]];
                indices.iter().all(|&i| labels[i] == first)
            }
        }
    }

    fn build(&self, indices: Vec<usize>, depth: usize) -> TreeNode {
        if depth >= self.config.max_depth
            || indices.len() < self.config.min_samples_split
            || self.is_pure(&indices)
        {
            return self.leaf(&indices);
        }
        let Some((feature, threshold)) = self.best_split(&indices) else {
            return self.leaf(&indices);
        };
        let (left, right): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.data.get(i, feature) <= threshold);
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(self.build(left, depth + 1)),
            right: Box::new(self.build(right, depth + 1)),
        }
    }

    /// Best (feature, threshold) by a single sorted sweep per feature with
    /// incremental statistics. Strict improvement keeps the lowest feature
    /// index and lowest threshold on ties.
    fn best_split(&self, indices: &[usize]) -> Option<(usize, f64)> {
        let n = indices.len();
        let mut best: Option<(f64, usize, f64)> = None;

        for feature in 0..self.data.cols() {
            let mut order: Vec<usize> = indices.to_vec();
            order.sort_by(|&a, &b| {
                self.data
                    .get(a, feature)
                    .partial_cmp(&self.data.get(b, feature))
                    .unwrap()
            });

            match &self.targets {
                Targets::Regression(y) => {
                    let total_sum: f64 = order.iter().map(|&i| y[i]).sum();
                    let total_sumsq: f64 = order.iter().map(|&i| y[i] * y[i]).sum();
                    let mut left_sum = 0.0;
                    let mut left_sumsq = 0.0;
                    for p in 1..n {
                        let prev = order[p - 1];
                        left_sum += y[prev];
                        left_sumsq += y[prev] * y[prev];
                        let (v_prev, v_here) = (
                            self.data.get(prev, feature),
                            self.data.get(order[p], feature),
                        );
                        if v_prev == v_here {
                            continue;
                        }
                        let nl = p as f64;
                        let nr = (n - p) as f64;
                        let sse_l = left_sumsq - left_sum * left_sum / nl;
                        let right_sum = total_sum - left_sum;
                        let sse_r = (total_sumsq - left_sumsq) - right_sum * right_sum / nr;
                        let score = sse_l + sse_r;
                        if best.map_or(true, |(s, _, _)| score < s) {
                            best = Some((score, feature, 0.5 * (v_prev + v_here)));
                        }
                    }
                }
                Targets::Classification { labels, classes } => {
                    let mut total = vec![0.0f64; *classes];
                    for &i in &order {
                        total[labels[i]] += 1.0;
                    }
                    let mut left = vec![0.0f64; *classes];
                    for p in 1..n {
                        let prev = order[p - 1];
                        left[labels[prev]] += 1.0;
                        let (v_prev, v_here) = (
                            self.data.get(prev, feature),
                            self.data.get(order[p], feature),
                        );
                        if v_prev == v_here {
                            continue;
                        }
                        let nl = p as f64;
                        let nr = (n - p) as f64;
                        let mut sq_l = 0.0;
                        let mut sq_r = 0.0;
                        for c in 0..*classes {
                            sq_l += left[c] * left[c];
                            let r = total[c] - left[c];
                            sq_r += r * r;
                        }
                        // weighted gini: n_child · (1 − Σ p²)
                        let score = (nl - sq_l / nl) + (nr - sq_r / nr);
                        if best.map_or(true, |(s, _, _)| score < s) {
                            best = Some((score, feature, 0.5 * (v_prev + v_here)));
                        }
                    }
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}
