//! Linear-family fitters: least squares and ridge in closed form via the
//! normal equations, lasso via cyclic coordinate descent.

use super::{FittedModel, MlError, ModelParams, ModelSpec, Standardizer};

pub const LASSO_TOLERANCE: f64 = 1e-8;
pub const LASSO_MAX_SWEEPS: usize = 10_000;

/// Solves `a * x = b` in place with partial pivoting. `a` is row-major, n x n.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, MlError> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return Err(MlError::SingularMatrix);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Builds X^T X and X^T y for rows with a leading intercept column.
fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let dim = x[0].len() + 1;
    let mut xtx = vec![vec![0.0; dim]; dim];
    let mut xty = vec![0.0; dim];
    for (row, &target) in x.iter().zip(y) {
        let mut augmented = Vec::with_capacity(dim);
        augmented.push(1.0);
        augmented.extend_from_slice(row);
        for i in 0..dim {
            for j in i..dim {
                xtx[i][j] += augmented[i] * augmented[j];
            }
            xty[i] += augmented[i] * target;
        }
    }
    for i in 0..dim {
        for j in 0..i {
            xtx[i][j] = xtx[j][i];
        }
    }
    (xtx, xty)
}

pub fn fit_least_squares(
    spec: &ModelSpec,
    x: &[Vec<f64>],
    y: &[f64],
) -> Result<FittedModel, MlError> {
    let (xtx, xty) = normal_equations(x, y);
    let beta = solve(xtx, xty)?;
    Ok(FittedModel {
        spec: spec.clone(),
        dim: x[0].len(),
        standardizer: None,
        params: ModelParams::Linear {
            intercept: beta[0],
            coefficients: beta[1..].to_vec(),
        },
    })
}

/// Ridge on z-scored features with centred targets; the intercept is the
/// target mean and is not penalized. Objective:
/// (1/2n)||y - Xb||^2 + (lambda/2)||b||^2.
pub fn fit_ridge(spec: &ModelSpec, x: &[Vec<f64>], y: &[f64]) -> Result<FittedModel, MlError> {
    if spec.lambda < 0.0 {
        return Err(MlError::InvalidHyperparameter(format!(
            "ridge lambda must be non-negative, got {}",
            spec.lambda
        )));
    }
    let standardizer = Standardizer::fit(x);
    let z = standardizer.transform_all(x);
    let n = y.len() as f64;
    let y_mean = y.iter().sum::<f64>() / n;
    let dim = x[0].len();
    let mut xtx = vec![vec![0.0; dim]; dim];
    let mut xty = vec![0.0; dim];
    for (row, &target) in z.iter().zip(y) {
        for i in 0..dim {
            for j in i..dim {
                xtx[i][j] += row[i] * row[j];
            }
            xty[i] += row[i] * (target - y_mean);
        }
    }
    for i in 0..dim {
        for j in 0..i {
            xtx[i][j] = xtx[j][i];
        }
    }
    for i in 0..dim {
        for j in 0..dim {
            xtx[i][j] /= n;
        }
        xty[i] /= n;
        xtx[i][i] += spec.lambda;
    }
    let coefficients = solve(xtx, xty)?;
    Ok(FittedModel {
        spec: spec.clone(),
        dim,
        standardizer: Some(standardizer),
        params: ModelParams::Linear {
            intercept: y_mean,
            coefficients,
        },
    })
}

fn soft_threshold(v: f64, threshold: f64) -> f64 {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        0.0
    }
}

/// Lasso by cyclic coordinate descent on z-scored features. Objective:
/// (1/2n)||y - Xb||^2 + lambda * ||b||_1. Converged when no coefficient
/// moves more than `LASSO_TOLERANCE` in one sweep.
pub fn fit_lasso(spec: &ModelSpec, x: &[Vec<f64>], y: &[f64]) -> Result<FittedModel, MlError> {
    if spec.lambda < 0.0 {
        return Err(MlError::InvalidHyperparameter(format!(
            "lasso lambda must be non-negative, got {}",
            spec.lambda
        )));
    }
    let standardizer = Standardizer::fit(x);
    let z = standardizer.transform_all(x);
    let n = y.len();
    let nf = n as f64;
    let dim = x[0].len();
    let y_mean = y.iter().sum::<f64>() / nf;
    let centred: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    // per-coordinate curvature (1/n) * sum x_ij^2
    let col_norms: Vec<f64> = (0..dim)
        .map(|j| z.iter().map(|r| r[j] * r[j]).sum::<f64>() / nf)
        .collect();
    let mut beta = vec![0.0; dim];
    let mut residual = centred.clone();
    for _ in 0..LASSO_MAX_SWEEPS {
        let mut max_delta: f64 = 0.0;
        for j in 0..dim {
            if col_norms[j] == 0.0 {
                continue;
            }
            let old = beta[j];
            let rho = z
                .iter()
                .zip(&residual)
                .map(|(r, res)| r[j] * (res + r[j] * old))
                .sum::<f64>()
                / nf;
            let new = soft_threshold(rho, spec.lambda) / col_norms[j];
            if new != old {
                let delta = new - old;
                for (res, row) in residual.iter_mut().zip(&z) {
                    *res -= delta * row[j];
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta <= LASSO_TOLERANCE {
            break;
        }
    }
    Ok(FittedModel {
        spec: spec.clone(),
        dim,
        standardizer: Some(standardizer),
        params: ModelParams::Linear {
            intercept: y_mean,
            coefficients: beta,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::fit_xy;

    fn planted_linear() -> (Vec<Vec<f64>>, Vec<f64>) {
        // y = 2 x1 + 1, plus an irrelevant second feature
        let x: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![i as f64 * 0.5, ((i * 7) % 5) as f64])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        (x, y)
    }

    #[test]
    fn least_squares_recovers_planted_coefficients() {
        let (x, y) = planted_linear();
        let model = fit_xy(&ModelSpec::least_squares(), &x, &y).unwrap();
        match &model.params {
            ModelParams::Linear {
                intercept,
                coefficients,
            } => {
                assert!((intercept - 1.0).abs() < 1e-6);
                assert!((coefficients[0] - 2.0).abs() < 1e-6);
                assert!(coefficients[1].abs() < 1e-6);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn ridge_zero_lambda_matches_least_squares() {
        let (x, y) = planted_linear();
        let ls = fit_xy(&ModelSpec::least_squares(), &x, &y).unwrap();
        let ridge = fit_xy(&ModelSpec::ridge(0.0), &x, &y).unwrap();
        for probe in &x {
            let a = ls.predict(probe).unwrap();
            let b = ridge.predict(probe).unwrap();
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn lasso_full_shrinkage_predicts_training_mean() {
        let (x, y) = planted_linear();
        let model = fit_xy(&ModelSpec::lasso(1e9), &x, &y).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        match &model.params {
            ModelParams::Linear { coefficients, .. } => {
                assert!(coefficients.iter().all(|c| *c == 0.0));
            }
            _ => unreachable!(),
        }
        assert!((model.predict(&x[3]).unwrap() - mean).abs() < 1e-9);
    }

    #[test]
    fn lasso_zero_lambda_converges_to_least_squares() {
        let (x, y) = planted_linear();
        let ls = fit_xy(&ModelSpec::least_squares(), &x, &y).unwrap();
        let lasso = fit_xy(&ModelSpec::lasso(0.0), &x, &y).unwrap();
        for probe in &x {
            let a = ls.predict(probe).unwrap();
            let b = lasso.predict(probe).unwrap();
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn singular_design_recommends_ridge() {
        // duplicated feature column makes X^T X singular
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let err = fit_xy(&ModelSpec::least_squares(), &x, &y).unwrap_err();
        assert!(err.to_string().contains("ridge"));
        // ridge handles the same data
        assert!(fit_xy(&ModelSpec::ridge(1.0), &x, &y).is_ok());
    }

    #[test]
    fn shuffle_invariance_of_linear_fits() {
        let (x, y) = planted_linear();
        let mut shuffled: Vec<(Vec<f64>, f64)> =
            x.iter().cloned().zip(y.iter().copied()).collect();
        shuffled.reverse();
        shuffled.swap(0, 5);
        let (xs, ys): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
        for spec in [
            ModelSpec::least_squares(),
            ModelSpec::ridge(0.7),
            ModelSpec::lasso(0.05),
        ] {
            let a = fit_xy(&spec, &x, &y).unwrap();
            let b = fit_xy(&spec, &xs, &ys).unwrap();
            for probe in &x {
                let pa = a.predict(probe).unwrap();
                let pb = b.predict(probe).unwrap();
                assert!((pa - pb).abs() < 1e-8, "{:?}: {pa} vs {pb}", spec.kind);
            }
        }
    }
}
