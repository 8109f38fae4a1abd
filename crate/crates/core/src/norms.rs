//! Row-structured norms. The central one interpolates between the squared
//! Frobenius norm and the row-sum norm through a single shape parameter:
//! each row with Euclidean norm `s` contributes `(1+t)s^2 / (1+t*s)`.
//! Small `t` recovers `s^2`, large `t` approaches `s` with a factor that
//! tends to one, so the same penalty can act ridge-like or sparsity-like.

use ndarray::{Array1, Array2};

use crate::error::{AnimcError, Result};

/// Diagonal of the majorizer for the interpolating norm at a given point,
/// kept with the shape parameter that produced it.
#[derive(Debug, Clone)]
pub struct ThetaDiag {
    pub diag: Array1<f64>,
    pub theta: f64,
}

/// Frobenius norm (not squared).
pub fn frobenius_norm(b: &Array2<f64>) -> f64 {
    b.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Sum of row Euclidean norms.
pub fn l21_norm(b: &Array2<f64>) -> f64 {
    row_norms(b).sum()
}

fn row_norms(b: &Array2<f64>) -> Array1<f64> {
    Array1::from_iter(
        b.rows()
            .into_iter()
            .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt()),
    )
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(AnimcError::Domain(format!(
            "shape parameter must be finite and > 0, got {theta}"
        )));
    }
    Ok(())
}

/// Interpolating row norm: sum over rows of `(1+t)s^2 / (1+t*s)`.
pub fn theta_norm(b: &Array2<f64>, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(row_norms(b)
        .iter()
        .map(|&s| (1.0 + theta) * s * s / (1.0 + theta * s))
        .sum())
}

/// Diagonal majorizer entries `(1+t)(2+t*s) / (1+t*s)^2`, with row norms
/// floored so all-zero rows stay harmless. Small `t` gives entries near 2
/// (matching the gradient of the squared Frobenius norm), large `t` gives
/// `1/s` (matching the row-sum norm).
pub fn theta_diag(b: &Array2<f64>, theta: f64, floor: f64) -> Result<ThetaDiag> {
    check_theta(theta)?;
    let diag = row_norms(b).mapv(|s| {
        let s = s.max(floor);
        let den = 1.0 + theta * s;
        (1.0 + theta) * (2.0 + theta * s) / (den * den)
    });
    Ok(ThetaDiag { diag, theta })
}

/// Gradient of the interpolating norm: the majorizer diagonal applied to
/// the rows of `b`.
pub fn theta_norm_gradient(b: &Array2<f64>, theta: f64, floor: f64) -> Result<Array2<f64>> {
    let d = theta_diag(b, theta, floor)?;
    let mut out = b.clone();
    for (mut row, &scale) in out.rows_mut().into_iter().zip(d.diag.iter()) {
        row.mapv_inplace(|v| v * scale);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DEFAULT_EPSILON_FLOOR as EPS;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn frobenius_and_row_sum_basics() {
        let b = array![[3.0, 4.0], [0.0, 0.0]];
        assert_abs_diff_eq!(frobenius_norm(&b), 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l21_norm(&b), 5.0, epsilon = 1e-15);
        let b2 = array![[1.0, 0.0], [0.0, 2.0]];
        assert_abs_diff_eq!(l21_norm(&b2), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn single_row_value_at_unit_shape() {
        let b = array![[3.0, 4.0]];
        assert_abs_diff_eq!(theta_norm(&b, 1.0).unwrap(), 25.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn majorizer_diag_at_unit_shape() {
        let b = array![[3.0, 4.0]];
        let d = theta_diag(&b, 1.0, EPS).unwrap();
        assert_eq!(d.diag.len(), 1);
        assert_abs_diff_eq!(d.diag[0], 7.0 / 18.0, epsilon = 1e-12);
    }

    #[test]
    fn gradient_at_unit_shape() {
        let b = array![[3.0, 4.0]];
        let g = theta_norm_gradient(&b, 1.0, EPS).unwrap();
        assert_abs_diff_eq!(g[[0, 0]], 7.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[[0, 1]], 14.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn small_shape_recovers_squared_frobenius() {
        let b = array![[3.0, 4.0], [1.0, -2.0]];
        let f2 = frobenius_norm(&b).powi(2);
        let v = theta_norm(&b, 1e-8).unwrap();
        assert!((v - f2).abs() <= 1e-3 * f2);
        // Majorizer entries approach the squared-norm gradient factor 2.
        let d = theta_diag(&b, 1e-9, EPS).unwrap();
        for &val in d.diag.iter() {
            assert_abs_diff_eq!(val, 2.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn large_shape_recovers_row_sum_norm() {
        let b = array![[3.0, 4.0], [1.0, -2.0]];
        let l21 = l21_norm(&b);
        let v = theta_norm(&b, 1e9).unwrap();
        assert!((v - l21).abs() <= 1e-3 * l21);
        let g = theta_norm_gradient(&array![[3.0, 4.0]], 1e9, EPS).unwrap();
        assert_abs_diff_eq!(g[[0, 0]], 0.6, epsilon = 1e-6);
        assert_abs_diff_eq!(g[[0, 1]], 0.8, epsilon = 1e-6);
    }

    #[test]
    fn nonpositive_shape_is_rejected() {
        let b = array![[1.0, 1.0]];
        assert!(matches!(theta_norm(&b, 0.0), Err(AnimcError::Domain(_))));
        assert!(matches!(theta_norm(&b, -1.0), Err(AnimcError::Domain(_))));
        assert!(matches!(theta_diag(&b, 0.0, EPS), Err(AnimcError::Domain(_))));
        assert!(matches!(
            theta_norm_gradient(&b, f64::NAN, EPS),
            Err(AnimcError::Domain(_))
        ));
    }

    #[test]
    fn zero_rows_contribute_nothing_and_stay_finite() {
        let b = array![[0.0, 0.0], [3.0, 4.0]];
        let v = theta_norm(&b, 1.0).unwrap();
        assert_abs_diff_eq!(v, 25.0 / 3.0, epsilon = 1e-12);
        let d = theta_diag(&b, 1.0, EPS).unwrap();
        assert!(d.diag.iter().all(|x| x.is_finite()));
        let g = theta_norm_gradient(&b, 1.0, EPS).unwrap();
        assert_eq!(g[[0, 0]], 0.0);
        assert_eq!(g[[0, 1]], 0.0);
    }

    #[test]
    fn value_nonincreasing_in_shape_when_rows_are_large() {
        // With every row norm >= 1 the per-row value decreases as the shape
        // parameter grows, so larger shapes penalize such matrices less.
        let b = array![[3.0, 4.0], [1.0, 1.0], [-2.0, 0.5]];
        let thetas = [1e-6, 1e-3, 0.1, 1.0, 10.0, 1e3, 1e9];
        let mut prev = f64::INFINITY;
        for &t in &thetas {
            let v = theta_norm(&b, t).unwrap();
            assert!(
                v <= prev + 1e-9 * prev.abs(),
                "value rose from {prev} to {v} at shape {t}"
            );
            prev = v;
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // Independent oracle: central differences on the scalar function.
        let b = array![[0.7, -1.3], [2.2, 0.4], [-0.9, 1.8]];
        for &theta in &[0.05, 1.0, 50.0] {
            let g = theta_norm_gradient(&b, theta, EPS).unwrap();
            let h = 1e-6;
            for i in 0..b.nrows() {
                for j in 0..b.ncols() {
                    let mut plus = b.clone();
                    plus[[i, j]] += h;
                    let mut minus = b.clone();
                    minus[[i, j]] -= h;
                    let fd = (theta_norm(&plus, theta).unwrap()
                        - theta_norm(&minus, theta).unwrap())
                        / (2.0 * h);
                    assert!(
                        (g[[i, j]] - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
                        "shape {theta} entry ({i},{j}): analytic {} vs numeric {fd}",
                        g[[i, j]]
                    );
                }
            }
        }
    }
}
