use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Solve the symmetric positive-definite system `a · x = b` by Cholesky
/// factorization. `b` may have multiple right-hand-side columns.
pub fn cholesky_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::shape("cholesky_solve", a.shape_str(), "square".to_string()));
    }
    if b.rows() != n {
        return Err(Error::shape("cholesky_solve", a.shape_str(), b.shape_str()));
    }

    // Lower-triangular factor, a = l · lᵀ.
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::Singular {
                        context: format!("non-positive pivot {sum:.3e} at row {i} during Cholesky"),
                    });
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }

    // Forward then back substitution for each right-hand side.
    let p = b.cols();
    let mut y = Matrix::zeros(n, p);
    for c in 0..p {
        for i in 0..n {
            let mut sum = b.get(i, c);
            for k in 0..i {
                sum -= l.get(i, k) * y.get(k, c);
            }
            y.set(i, c, sum / l.get(i, i));
        }
    }
    let mut x = Matrix::zeros(n, p);
    for c in 0..p {
        for i in (0..n).rev() {
            let mut sum = y.get(i, c);
            for k in i + 1..n {
                sum -= l.get(k, i) * x.get(k, c);
            }
            x.set(i, c, sum / l.get(i, i));
        }
    }
    Ok(x)
}

/// The `x` minimizing `‖a·x − b‖² + lambda·‖x‖²`, via Cholesky on the
/// regularized normal equations `(aᵀa + lambda·I) x = aᵀb`.
pub fn ridge_solve(a: &Matrix, b: &Matrix, lambda: f64) -> Result<Matrix> {
    if lambda < 0.0 {
        return Err(Error::Config(format!(
            "ridge_solve lambda must be non-negative, got {lambda}"
        )));
    }
    if a.rows() != b.rows() {
        return Err(Error::shape("ridge_solve", a.shape_str(), b.shape_str()));
    }
    let mut gram = a.matmul_tn(a)?;
    for i in 0..gram.rows() {
        let v = gram.get(i, i) + lambda;
        gram.set(i, i, v);
    }
    let rhs = a.matmul_tn(b)?;
    cholesky_solve(&gram, &rhs).map_err(|e| match e {
        Error::Singular { context } => Error::Singular {
            context: format!("{context} (aᵀa is singular at lambda = {lambda})"),
        },
        other => other,
    })
}

/// Row-wise softmax with the usual max-shift for stability.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean negative log-likelihood of the labeled class under row-wise softmax,
/// together with its gradient `(softmax − onehot) / batch`.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (b, c) = logits.shape();
    if labels.len() != b {
        return Err(Error::shape(
            "softmax_cross_entropy",
            logits.shape_str(),
            format!("{} labels", labels.len()),
        ));
    }
    for (i, &l) in labels.iter().enumerate() {
        if l >= c {
            return Err(Error::IndexOutOfRange {
                what: "class label",
                index: l,
                bound: c,
            });
        }
        let _ = i;
    }
    let probs = softmax(logits);
    let mut loss = 0.0;
    let mut grad = probs.clone();
    let inv_b = 1.0 / b as f64;
    for (i, &l) in labels.iter().enumerate() {
        // clamp to avoid -inf on fully saturated wrong predictions
        loss -= probs.get(i, l).max(1e-300).ln();
        grad.set(i, l, grad.get(i, l) - 1.0);
    }
    loss *= inv_b;
    grad.scale_assign(inv_b);
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use approx::assert_abs_diff_eq;

    /// Explicit normal-equations inverse via Gauss-Jordan, independent of the
    /// Cholesky path.
    fn ridge_oracle(a: &Matrix, b: &Matrix, lambda: f64) -> Matrix {
        let n = a.cols();
        let mut g = a.matmul_tn(a).unwrap();
        for i in 0..n {
            g.set(i, i, g.get(i, i) + lambda);
        }
        // invert g by Gauss-Jordan with partial pivoting
        let mut aug = Matrix::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug.set(i, j, g.get(i, j));
            }
            aug.set(i, n + i, 1.0);
        }
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if aug.get(r, col).abs() > aug.get(piv, col).abs() {
                    piv = r;
                }
            }
            if piv != col {
                for j in 0..2 * n {
                    let tmp = aug.get(col, j);
                    aug.set(col, j, aug.get(piv, j));
                    aug.set(piv, j, tmp);
                }
            }
            let d = aug.get(col, col);
            for j in 0..2 * n {
                aug.set(col, j, aug.get(col, j) / d);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = aug.get(r, col);
                for j in 0..2 * n {
                    aug.set(r, j, aug.get(r, j) - f * aug.get(col, j));
                }
            }
        }
        let mut inv = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv.set(i, j, aug.get(i, n + j));
            }
        }
        inv.matmul(&a.matmul_tn(b).unwrap()).unwrap()
    }

    #[test]
    fn ridge_identity_system_returns_rhs() {
        let b = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]).unwrap();
        let x = ridge_solve(&Matrix::identity(3), &b, 0.0).unwrap();
        for (g, w) in x.data().iter().zip(b.data()) {
            assert_abs_diff_eq!(g, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn ridge_huge_lambda_shrinks_solution() {
        let mut rng = Rng::new(17);
        let a = rng.gaussian(5, 3, 0.0, 1.0);
        let b = rng.gaussian(5, 2, 0.0, 1.0);
        let lambda = 1e9;
        let x = ridge_solve(&a, &b, lambda).unwrap();
        let atb = a.matmul_tn(&b).unwrap();
        assert!(x.frobenius_norm() <= atb.frobenius_norm() / lambda * (1.0 + 1e-9));
    }

    #[test]
    fn ridge_matches_normal_equations_oracle() {
        let mut rng = Rng::new(23);
        let a = rng.gaussian(4, 3, 0.0, 1.0);
        let b = rng.gaussian(4, 2, 0.0, 1.0);
        let got = ridge_solve(&a, &b, 0.1).unwrap();
        let want = ridge_oracle(&a, &b, 0.1);
        for (g, w) in got.data().iter().zip(want.data()) {
            assert_abs_diff_eq!(g, w, epsilon = 1e-9);
        }
    }

    #[test]
    fn ridge_singular_at_zero_lambda_advises_regularization() {
        // rank-deficient a: two identical columns
        let a = Matrix::from_rows(&[&[1.0, 1.0], &[2.0, 2.0], &[3.0, 3.0]]).unwrap();
        let b = Matrix::from_rows(&[&[1.0], &[2.0], &[3.0]]).unwrap();
        let err = ridge_solve(&a, &b, 0.0).unwrap_err();
        assert!(err.to_string().contains("regularization strength > 0"), "{err}");
        // and the regularized solve succeeds
        ridge_solve(&a, &b, 1e-3).unwrap();
    }

    #[test]
    fn ridge_residual_optimality_under_perturbation() {
        // perturbing the solution in random directions never lowers the objective
        let mut rng = Rng::new(31);
        let a = rng.gaussian(6, 4, 0.0, 1.0);
        let b = rng.gaussian(6, 2, 0.0, 1.0);
        let lambda = 0.05;
        let x = ridge_solve(&a, &b, lambda).unwrap();
        let objective = |x: &Matrix| -> f64 {
            let r = a.matmul(x).unwrap().sub(&b).unwrap();
            r.sum_squares() + lambda * x.sum_squares()
        };
        let base = objective(&x);
        for _ in 0..100 {
            let noise = rng.gaussian(x.rows(), x.cols(), 0.0, 1.0).scale(1e-3);
            let perturbed = x.add(&noise).unwrap();
            assert!(objective(&perturbed) >= base - 1e-12);
        }
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let logits = Matrix::zeros(4, 10);
        let labels = [0, 3, 7, 9];
        let (loss, _) = softmax_cross_entropy(&logits, &labels).unwrap();
        assert_abs_diff_eq!(loss, 10.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn cross_entropy_saturated_true_class() {
        let mut logits = Matrix::zeros(1, 5);
        logits.set(0, 2, 50.0);
        let (loss, _) = softmax_cross_entropy(&logits, &[2]).unwrap();
        assert!(loss < 1e-6);
    }

    #[test]
    fn cross_entropy_matches_direct_summation_oracle() {
        let mut rng = Rng::new(41);
        let logits = rng.gaussian(2, 3, 0.0, 2.0);
        let labels = [2usize, 0];
        let (loss, grad) = softmax_cross_entropy(&logits, &labels).unwrap();

        // direct summation with explicit softmax, no shift tricks
        let mut want_loss = 0.0;
        let mut want_grad = Matrix::zeros(2, 3);
        for i in 0..2 {
            let row = logits.row(i);
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            let p: Vec<f64> = row.iter().map(|v| v.exp() / z).collect();
            want_loss += -p[labels[i]].ln();
            for j in 0..3 {
                let onehot = if j == labels[i] { 1.0 } else { 0.0 };
                want_grad.set(i, j, (p[j] - onehot) / 2.0);
            }
        }
        want_loss /= 2.0;
        assert_abs_diff_eq!(loss, want_loss, epsilon = 1e-12);
        for (g, w) in grad.data().iter().zip(want_grad.data()) {
            assert_abs_diff_eq!(g, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = Rng::new(53);
        let logits = rng.gaussian(8, 6, 0.0, 5.0);
        let p = softmax(&logits);
        for i in 0..8 {
            let s: f64 = p.row(i).iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = Rng::new(67);
        let logits = rng.gaussian(3, 4, 0.0, 1.0);
        let labels = [1usize, 3, 0];
        let (_, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            for j in 0..4 {
                let mut hi = logits.clone();
                hi.set(i, j, hi.get(i, j) + h);
                let mut lo = logits.clone();
                lo.set(i, j, lo.get(i, j) - h);
                let (lh, _) = softmax_cross_entropy(&hi, &labels).unwrap();
                let (ll, _) = softmax_cross_entropy(&lo, &labels).unwrap();
                let fd = (lh - ll) / (2.0 * h);
                let an = grad.get(i, j);
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                assert!(rel < 1e-6, "fd {fd} vs analytic {an} at ({i},{j})");
            }
        }
    }

    #[test]
    fn cross_entropy_label_out_of_range() {
        let logits = Matrix::zeros(2, 3);
        let err = softmax_cross_entropy(&logits, &[0, 3]).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { .. }));
    }
}
