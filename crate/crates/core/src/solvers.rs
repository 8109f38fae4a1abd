//! Linear-algebra kernels shared by the optimizers: a positive-definite
//! solver with a ridge retry, a small Sylvester-type solver for equations
//! of the form `U M + N U = C`, and the regression-factor solver in both
//! its direct and inverted (low-rank update) forms.

use ndarray::{Array1, Array2};

use crate::error::{AnimcError, Result};
use crate::norms::ThetaDiag;

const RIDGE: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-8;

pub(crate) fn to_na(a: &Array2<f64>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_iterator(a.nrows(), a.ncols(), a.iter().cloned())
}

pub(crate) fn from_na(m: &nalgebra::DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Solve `K Z = Y` for symmetric positive (semi)definite `K` by Cholesky.
/// A failed factorization gets one retry with a small ridge on the
/// diagonal; the result must still satisfy the residual bound against the
/// original `K`, so inconsistent systems fail instead of being silently
/// regularized away.
pub fn solve_spd(k: &Array2<f64>, y: &Array2<f64>) -> Result<Array2<f64>> {
    if k.nrows() != k.ncols() {
        return Err(AnimcError::Dimension(format!(
            "coefficient matrix is {}x{}, expected square",
            k.nrows(),
            k.ncols()
        )));
    }
    if y.nrows() != k.nrows() {
        return Err(AnimcError::Dimension(format!(
            "right-hand side has {} rows, expected {}",
            y.nrows(),
            k.nrows()
        )));
    }
    let na_k = to_na(k);
    let na_y = to_na(y);
    let chol = match na_k.clone().cholesky() {
        Some(c) => c,
        None => {
            let scale = 1.0 + na_k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let ridged = &na_k + nalgebra::DMatrix::identity(k.nrows(), k.nrows()) * (RIDGE * scale);
            ridged.cholesky().ok_or_else(|| {
                AnimcError::Solver(
                    "matrix is not positive definite even after a ridge retry".into(),
                )
            })?
        }
    };
    let mut z = chol.solve(&na_y);
    let tol = RESIDUAL_TOL * (1.0 + na_y.norm());
    let mut resid = &na_y - &na_k * &z;
    if resid.norm() > tol {
        // One refinement pass with the (possibly ridged) factorization.
        z += chol.solve(&resid);
        resid = &na_y - &na_k * &z;
        if resid.norm() > tol {
            return Err(AnimcError::Solver(format!(
                "solution residual {} exceeds tolerance {tol}",
                resid.norm()
            )));
        }
    }
    Ok(from_na(&z))
}

/// The equation `U M + N U = C` with `M` (c x c) and `N` (d x d) symmetric
/// positive semidefinite and `C` (d x c).
#[derive(Debug, Clone)]
pub struct SylvesterProblem {
    pub m: Array2<f64>,
    pub n: Array2<f64>,
    pub c: Array2<f64>,
}

fn check_symmetric(a: &Array2<f64>, what: &str) -> Result<()> {
    let scale = 1.0 + a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            if (a[[i, j]] - a[[j, i]]).abs() > 1e-10 * scale {
                return Err(AnimcError::Validation(format!(
                    "{what} is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

impl SylvesterProblem {
    pub fn new(m: Array2<f64>, n: Array2<f64>, c: Array2<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(AnimcError::Dimension(format!(
                "right coefficient is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if n.nrows() != n.ncols() {
            return Err(AnimcError::Dimension(format!(
                "left coefficient is {}x{}, expected square",
                n.nrows(),
                n.ncols()
            )));
        }
        if c.nrows() != n.nrows() || c.ncols() != m.nrows() {
            return Err(AnimcError::Dimension(format!(
                "right-hand side is {}x{}, expected {}x{}",
                c.nrows(),
                c.ncols(),
                n.nrows(),
                m.nrows()
            )));
        }
        check_symmetric(&m, "right coefficient")?;
        check_symmetric(&n, "left coefficient")?;
        Ok(Self { m, n, c })
    }
}

fn kron(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Solve `U M + N U = C` by vectorizing columns: with symmetric `M` the
/// stacked operator is `M (x) I + I (x) N`, which is symmetric positive
/// semidefinite whenever `M` and `N` are, so the positive-definite solver
/// (with its ridge retry) applies.
pub fn solve_sylvester(p: &SylvesterProblem) -> Result<Array2<f64>> {
    let d = p.n.nrows();
    let c = p.m.nrows();
    let eye_d = Array2::eye(d);
    let eye_c = Array2::eye(c);
    let k = kron(&p.m, &eye_d) + kron(&eye_c, &p.n);
    // Stack columns of C.
    let mut y = Array2::zeros((d * c, 1));
    for j in 0..c {
        for i in 0..d {
            y[[j * d + i, 0]] = p.c[[i, j]];
        }
    }
    let x = solve_spd(&k, &y)?;
    let mut u = Array2::zeros((d, c));
    for j in 0..c {
        for i in 0..d {
            u[[i, j]] = x[[j * d + i, 0]];
        }
    }
    let resid = &u.dot(&p.m) + &p.n.dot(&u) - &p.c;
    let bound = RESIDUAL_TOL * (1.0 + crate::norms::frobenius_norm(&p.c));
    let rnorm = crate::norms::frobenius_norm(&resid);
    if rnorm > bound {
        return Err(AnimcError::Solver(format!(
            "stacked solve residual {rnorm} exceeds tolerance {bound}"
        )));
    }
    Ok(u)
}

fn check_reg_inputs(u: &Array2<f64>, d_a: &ThetaDiag, alpha: f64, beta: f64) -> Result<()> {
    if d_a.diag.len() != u.nrows() {
        return Err(AnimcError::Dimension(format!(
            "majorizer diagonal has {} entries for a basis with {} rows",
            d_a.diag.len(),
            u.nrows()
        )));
    }
    if !(alpha.is_finite() && alpha >= 0.0) || !(beta.is_finite() && beta >= 0.0) {
        return Err(AnimcError::Domain(format!(
            "penalty weights must be finite and >= 0, got alpha={alpha} beta={beta}"
        )));
    }
    if let Some(&bad) = d_a.diag.iter().find(|v| !(**v > 0.0)) {
        return Err(AnimcError::Domain(format!(
            "majorizer diagonal must be strictly positive, found {bad}"
        )));
    }
    Ok(())
}

/// Regression factor by the direct normal equations:
/// `A = alpha (alpha U U^T + beta D)^{-1} U`.
pub fn solve_a_direct(
    u: &Array2<f64>,
    d_a: &ThetaDiag,
    alpha: f64,
    beta: f64,
) -> Result<Array2<f64>> {
    check_reg_inputs(u, d_a, alpha, beta)?;
    let d = u.nrows();
    if alpha == 0.0 {
        return Ok(Array2::zeros((d, u.ncols())));
    }
    let mut k = u.dot(&u.t()) * alpha;
    for i in 0..d {
        k[[i, i]] += beta * d_a.diag[i];
    }
    solve_spd(&k, &(u * alpha))
}

/// Same solution through the inverted form, which factors a c x c system
/// instead of a d x d one:
/// `A = (alpha/beta) [D^{-1} U - D^{-1} U (U^T D^{-1} U + (beta/alpha) I)^{-1} U^T D^{-1} U]`.
/// Falls back to the direct route when either penalty weight is zero, where
/// this form is undefined.
pub fn solve_a_woodbury(
    u: &Array2<f64>,
    d_a: &ThetaDiag,
    alpha: f64,
    beta: f64,
) -> Result<Array2<f64>> {
    check_reg_inputs(u, d_a, alpha, beta)?;
    if alpha == 0.0 {
        return Ok(Array2::zeros((u.nrows(), u.ncols())));
    }
    if beta == 0.0 {
        return solve_a_direct(u, d_a, alpha, beta);
    }
    let c = u.ncols();
    let dinv = d_a.diag.mapv(|v| 1.0 / v);
    let du = scale_rows(u, &dinv);
    let utdu = u.t().dot(&du);
    let mut inner = utdu.clone();
    for i in 0..c {
        inner[[i, i]] += beta / alpha;
    }
    let w = solve_spd(&inner, &utdu)?;
    Ok((&du - &du.dot(&w)) * (alpha / beta))
}

fn scale_rows(a: &Array2<f64>, s: &Array1<f64>) -> Array2<f64> {
    let mut out = a.clone();
    for (mut row, &f) in out.rows_mut().into_iter().zip(s.iter()) {
        row.mapv_inplace(|v| v * f);
    }
    out
}
