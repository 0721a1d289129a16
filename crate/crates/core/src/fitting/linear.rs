use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition number of the column-scaled normal matrix above which a fit is
/// refused.
pub(crate) const MAX_CONDITION: f64 = 1e12;

#[derive(Debug)]
pub(crate) struct LinearSolution {
    pub params: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub chi_square: f64,
}

/// Weighted linear least squares `y ~ X p` through the normal equations.
///
/// Columns are scaled to unit weighted norm before the solve; the
/// conditioning check is applied to the scaled system.
pub(crate) fn weighted_lsq(design: &DMatrix<f64>, y: &DVector<f64>, sigma: &DVector<f64>) -> Result<LinearSolution> {
    let (n, p) = design.shape();
    let mut a = design.clone();
    let mut b = y.clone();
    for i in 0..n {
        let w = 1.0 / sigma[i];
        a.row_mut(i).scale_mut(w);
        b[i] *= w;
    }
    let mut scale = DVector::zeros(p);
    for j in 0..p {
        let norm = a.column(j).norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::RankDeficient(format!("design column {j} is zero")));
        }
        scale[j] = norm;
        a.column_mut(j).unscale_mut(norm);
    }
    let normal = a.transpose() * &a;
    let eig = normal.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= max * f64::EPSILON * p as f64 {
        return Err(Error::RankDeficient(format!(
            "normal matrix is singular (eigenvalues {min:e} .. {max:e})"
        )));
    }
    let cond = max / min;
    if cond > MAX_CONDITION {
        return Err(Error::IllConditioned(cond));
    }
    let chol = normal
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("normal matrix not positive definite".into()))?;
    let scaled_params = chol.solve(&(a.transpose() * &b));
    let scaled_cov = chol.inverse();

    let resid = &b - &a * &scaled_params;
    let chi_square = resid.norm_squared();

    let params = scaled_params.component_div(&scale);
    let mut covariance = scaled_cov;
    for i in 0..p {
        for j in 0..p {
            covariance[(i, j)] /= scale[i] * scale[j];
        }
    }
    Ok(LinearSolution {
        params,
        covariance,
        chi_square,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line_with_known_covariance() {
        // y = 2 + 3x, unit sigmas; covariance is (X^T X)^-1.
        let xs = [0.0, 1.0, 2.0, 3.0];
        let design = DMatrix::from_fn(4, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let y = DVector::from_iterator(4, xs.iter().map(|x| 2.0 + 3.0 * x));
        let sol = weighted_lsq(&design, &y, &DVector::from_element(4, 1.0)).unwrap();
        assert!((sol.params[0] - 2.0).abs() < 1e-13);
        assert!((sol.params[1] - 3.0).abs() < 1e-13);
        assert!(sol.chi_square < 1e-24);
        // X^T X = [[4, 6], [6, 14]] -> inverse = [[0.7, -0.3], [-0.3, 0.2]]
        assert!((sol.covariance[(0, 0)] - 0.7).abs() < 1e-13);
        assert!((sol.covariance[(0, 1)] + 0.3).abs() < 1e-13);
        assert!((sol.covariance[(1, 1)] - 0.2).abs() < 1e-13);
    }

    #[test]
    fn collinear_columns_are_rejected() {
        let design = DMatrix::from_fn(5, 2, |i, j| (i + 1) as f64 * (j + 1) as f64);
        let y = DVector::from_element(5, 1.0);
        let err = weighted_lsq(&design, &y, &DVector::from_element(5, 1.0)).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(_) | Error::IllConditioned(_)));
    }
}
