//! Single-view matrix factorization baselines and the unweighted
//! multi-view reference the auto-weighted solver is compared against.
//! All of them factor a data matrix into a basis times a latent matrix,
//! differing in the ridge term and the nonnegativity constraint.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::animc::{fit as animc_fit, AnimcConfig, LabelMode};
use crate::data::{Hyperparams, MultiViewDataset, DEFAULT_EPSILON_FLOOR};
use crate::error::{AnimcError, Result};
use crate::norms::frobenius_norm;
use crate::solvers::solve_spd;

/// Iteration budget, stopping tolerance, and seed for a baseline fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitControls {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for FitControls {
    fn default() -> Self {
        Self { max_iter: 100, rel_tol: 1e-6, seed: 0 }
    }
}

/// Output of any baseline: per-view bases, the shared latent matrix, and
/// the objective value after initialization and after every iteration.
#[derive(Debug, Clone)]
pub struct FactorizationResult {
    pub basis: Vec<Array2<f64>>,
    pub latent: Array2<f64>,
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
}

fn check_single_view(x: &Array2<f64>, c: usize) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(AnimcError::Validation("data matrix is empty".into()));
    }
    if c == 0 {
        return Err(AnimcError::Validation("factor rank must be at least 1".into()));
    }
    if c > x.ncols() {
        return Err(AnimcError::Validation(format!(
            "factor rank {c} exceeds the instance count {}",
            x.ncols()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(AnimcError::Validation("data matrix contains a nonfinite entry".into()));
    }
    Ok(())
}

fn init_latent(rng: &mut ChaCha8Rng, n: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, c), |_| rng.random_range(0.1..1.0))
}

/// Ridge-regularized basis: `U = X V (alpha I + V^T V)^{-1}`.
fn ridge_basis(x: &Array2<f64>, v: &Array2<f64>, alpha: f64) -> Result<Array2<f64>> {
    let c = v.ncols();
    let mut k = v.t().dot(v);
    for i in 0..c {
        k[[i, i]] += alpha;
    }
    // Solve K Z = V^T X^T, then U = Z^T.
    let z = solve_spd(&k, &v.t().dot(&x.t()))?;
    Ok(z.t().to_owned())
}

/// Multiplicative latent step shared by the nonnegative baselines: with
/// `Q = alpha I + U^T U` split into positive and negative parts, scale
/// each latent entry by the square root of
/// `((X^T U)^+ + V Q^-) / ((X^T U)^- + V Q^+)`.
fn multiplicative_latent(
    x: &Array2<f64>,
    u: &Array2<f64>,
    v: &Array2<f64>,
    alpha: f64,
) -> Array2<f64> {
    let pos = |b: &Array2<f64>| b.mapv(|e| (e.abs() + e) * 0.5);
    let neg = |b: &Array2<f64>| b.mapv(|e| (e.abs() - e) * 0.5);
    let xtu = x.t().dot(u);
    let mut q = u.t().dot(u);
    for i in 0..q.nrows() {
        q[[i, i]] += alpha;
    }
    let num = pos(&xtu) + v.dot(&neg(&q));
    let den = (neg(&xtu) + v.dot(&pos(&q))).mapv(|e| e.max(DEFAULT_EPSILON_FLOOR));
    let mut out = v.clone();
    for ((o, n), d) in out.iter_mut().zip(num.iter()).zip(den.iter()) {
        *o *= (n / d).sqrt();
    }
    out
}

fn reconstruction_error(x: &Array2<f64>, u: &Array2<f64>, v: &Array2<f64>) -> f64 {
    frobenius_norm(&(x - &u.dot(&v.t()))).powi(2)
}

fn converged(prev: f64, current: f64, rel_tol: f64) -> bool {
    (prev - current).abs() <= rel_tol * prev.abs().max(1.0)
}

/// Unconstrained ridge-regularized factorization: both factors solve their
/// least-squares subproblem exactly, alternating.
pub fn rmf_fit(
    x: &Array2<f64>,
    c: usize,
    alpha: f64,
    ctrl: &FitControls,
) -> Result<FactorizationResult> {
    check_single_view(x, c)?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(AnimcError::Domain(format!("ridge weight must be finite and >= 0, got {alpha}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctrl.seed);
    let mut v = init_latent(&mut rng, x.ncols(), c);
    let mut u = ridge_basis(x, &v, alpha)?;
    let obj = |u: &Array2<f64>, v: &Array2<f64>| {
        reconstruction_error(x, u, v)
            + alpha * (frobenius_norm(u).powi(2) + frobenius_norm(v).powi(2))
    };
    let mut trace = vec![obj(&u, &v)];
    let mut iterations_run = ctrl.max_iter;
    for t in 1..=ctrl.max_iter {
        u = ridge_basis(x, &v, alpha)?;
        // The latent solve mirrors the basis solve on the transpose.
        v = ridge_basis(&x.t().to_owned(), &u, alpha)?;
        let current = obj(&u, &v);
        let prev = *trace.last().unwrap();
        trace.push(current);
        if converged(prev, current, ctrl.rel_tol) {
            iterations_run = t;
            break;
        }
    }
    Ok(FactorizationResult {
        basis: vec![u],
        latent: v,
        objective_trace: trace,
        iterations_run,
    })
}

/// Semi-nonnegative factorization: exact basis solve, multiplicative
/// nonnegative latent step, no ridge.
pub fn semi_nmf_fit(x: &Array2<f64>, c: usize, ctrl: &FitControls) -> Result<FactorizationResult> {
    semi_factorization(x, c, 0.0, false, ctrl)
}

/// Ridge-regularized semi-nonnegative factorization. With the ridge weight
/// at zero this reproduces the plain semi-nonnegative path step for step.
pub fn semi_rnmf_fit(
    x: &Array2<f64>,
    c: usize,
    alpha: f64,
    ctrl: &FitControls,
) -> Result<FactorizationResult> {
    semi_factorization(x, c, alpha, true, ctrl)
}

fn semi_factorization(
    x: &Array2<f64>,
    c: usize,
    alpha: f64,
    ridged_objective: bool,
    ctrl: &FitControls,
) -> Result<FactorizationResult> {
    check_single_view(x, c)?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(AnimcError::Domain(format!("ridge weight must be finite and >= 0, got {alpha}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctrl.seed);
    let mut v = init_latent(&mut rng, x.ncols(), c);
    let mut u = ridge_basis(x, &v, alpha)?;
    let obj = |u: &Array2<f64>, v: &Array2<f64>| {
        reconstruction_error(x, u, v)
            + if ridged_objective {
                alpha * (frobenius_norm(u).powi(2) + frobenius_norm(v).powi(2))
            } else {
                0.0
            }
    };
    let mut trace = vec![obj(&u, &v)];
    let mut iterations_run = ctrl.max_iter;
    for t in 1..=ctrl.max_iter {
        u = ridge_basis(x, &v, alpha)?;
        v = multiplicative_latent(x, &u, &v, alpha);
        let current = obj(&u, &v);
        let prev = *trace.last().unwrap();
        trace.push(current);
        if converged(prev, current, ctrl.rel_tol) {
            iterations_run = t;
            break;
        }
    }
    Ok(FactorizationResult {
        basis: vec![u],
        latent: v,
        objective_trace: trace,
        iterations_run,
    })
}

/// Unweighted multi-view factorization on incomplete data: the same
/// alternating path as the auto-weighted solver, with every view weight
/// pinned to one for the whole run. The trace records the residual-power
/// surrogate objective.
pub fn naive_incomplete_fit(
    ds: &MultiViewDataset,
    alpha: f64,
    r: f64,
    ctrl: &FitControls,
) -> Result<FactorizationResult> {
    let hp = Hyperparams {
        alpha,
        r,
        max_iter: ctrl.max_iter,
        rel_tol: ctrl.rel_tol,
        ..Hyperparams::default()
    };
    let config = AnimcConfig {
        hp,
        freeze_weights: true,
        initial_weight: Some(1.0),
        label_mode: LabelMode::Kmeans,
        seed: ctrl.seed,
        ..Default::default()
    };
    let out = animc_fit(ds, &config)?;
    Ok(FactorizationResult {
        basis: out.state.u,
        latent: out.state.v,
        objective_trace: out.trace.iter().map(|rec| rec.r_objective).collect(),
        iterations_run: out.iterations_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{PresenceMask, ViewMatrix};
    use approx::assert_abs_diff_eq;

    fn random_data(seed: u64, d: usize, n: usize) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((d, n), |_| rng.random_range(-2.0..2.0))
    }

    fn wrap_single_view(x: &Array2<f64>, c: usize) -> MultiViewDataset {
        MultiViewDataset {
            name: "single".into(),
            views: vec![(
                ViewMatrix::new("only", x.clone()),
                PresenceMask::all_present(x.ncols(), x.nrows()),
            )],
            labels: None,
            c,
        }
    }

    #[test]
    fn ridge_factorization_recovers_rank_one_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u_true = Array2::from_shape_fn((6, 1), |_| rng.random_range(-1.0..1.0));
        let v_true = Array2::from_shape_fn((10, 1), |_| rng.random_range(0.1..1.0));
        let x = u_true.dot(&v_true.t());
        let out = rmf_fit(&x, 1, 1e-8, &FitControls::default()).unwrap();
        let resid = reconstruction_error(&x, &out.basis[0], &out.latent);
        let scale = frobenius_norm(&x).powi(2);
        assert!(resid <= 1e-6 * scale, "relative residual {}", resid / scale);
    }

    #[test]
    fn overwhelming_ridge_collapses_factors() {
        let x = random_data(2, 5, 8);
        let out = rmf_fit(&x, 2, 1e8, &FitControls::default()).unwrap();
        let target = frobenius_norm(&x).powi(2);
        let last = *out.objective_trace.last().unwrap();
        assert!(
            (last - target).abs() <= 1e-3 * target,
            "objective {last} vs pure-data bound {target}"
        );
    }

    #[test]
    fn all_baseline_traces_are_nonincreasing() {
        for seed in 0..4 {
            let x = random_data(100 + seed, 7, 15);
            let ctrl = FitControls { seed, ..Default::default() };
            let fits = [
                rmf_fit(&x, 3, 0.5, &ctrl).unwrap(),
                semi_nmf_fit(&x, 3, &ctrl).unwrap(),
                semi_rnmf_fit(&x, 3, 0.5, &ctrl).unwrap(),
            ];
            for out in &fits {
                let slack = 1e-8 * (1.0 + out.objective_trace[0].abs());
                for pair in out.objective_trace.windows(2) {
                    assert!(
                        pair[1] <= pair[0] + slack,
                        "trace rose from {} to {} (seed {seed})",
                        pair[0],
                        pair[1]
                    );
                }
            }
        }
    }

    #[test]
    fn semi_variants_agree_without_ridge() {
        let x = random_data(7, 6, 12);
        let ctrl = FitControls { max_iter: 30, rel_tol: 1e-14, seed: 3 };
        let plain = semi_nmf_fit(&x, 3, &ctrl).unwrap();
        let ridged = semi_rnmf_fit(&x, 3, 0.0, &ctrl).unwrap();
        assert_eq!(plain.objective_trace.len(), ridged.objective_trace.len());
        for (a, b) in plain.objective_trace.iter().zip(ridged.objective_trace.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(plain
            .latent
            .iter()
            .zip(ridged.latent.iter())
            .all(|(a, b)| (a - b).abs() <= 1e-12));
    }

    #[test]
    fn nonnegative_latents_stay_nonnegative() {
        let x = random_data(9, 8, 20);
        let out = semi_nmf_fit(&x, 4, &FitControls::default()).unwrap();
        assert!(out.latent.iter().all(|&v| v >= 0.0));
        let out = semi_rnmf_fit(&x, 4, 0.3, &FitControls::default()).unwrap();
        assert!(out.latent.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn unweighted_multi_view_objective_reduces_to_ridged_form() {
        // On one complete view with a squared residual exponent, the
        // surrogate objective is exactly the ridged single-view objective
        // evaluated at the same factors.
        let x = random_data(11, 6, 14);
        let ds = wrap_single_view(&x, 3);
        let alpha = 0.2;
        let out = naive_incomplete_fit(&ds, alpha, 2.0, &FitControls::default()).unwrap();
        let expected = reconstruction_error(&x, &out.basis[0], &out.latent)
            + alpha
                * (frobenius_norm(&out.basis[0]).powi(2) + frobenius_norm(&out.latent).powi(2));
        let last = *out.objective_trace.last().unwrap();
        assert_abs_diff_eq!(last, expected, epsilon = 1e-9 * (1.0 + expected));
    }

    #[test]
    fn duplicated_views_share_the_single_view_latent() {
        // With the ridge off, doubling a complete view scales both sides of
        // every multiplicative ratio equally, so the latent trajectory
        // matches the single-view run draw for draw.
        let x = random_data(13, 5, 10);
        let single = wrap_single_view(&x, 2);
        let mut double = wrap_single_view(&x, 2);
        double.views.push(double.views[0].clone());
        let ctrl = FitControls { max_iter: 15, rel_tol: 1e-14, seed: 5 };
        let a = naive_incomplete_fit(&single, 0.0, 2.0, &ctrl).unwrap();
        let b = naive_incomplete_fit(&double, 0.0, 2.0, &ctrl).unwrap();
        let diff = frobenius_norm(&(&a.latent - &b.latent));
        assert!(
            diff <= 1e-9 * (1.0 + frobenius_norm(&a.latent)),
            "latents diverged by {diff}"
        );
    }

    #[test]
    fn baseline_fits_are_deterministic() {
        let x = random_data(17, 6, 12);
        let ctrl = FitControls { seed: 9, ..Default::default() };
        let a = semi_rnmf_fit(&x, 3, 0.4, &ctrl).unwrap();
        let b = semi_rnmf_fit(&x, 3, 0.4, &ctrl).unwrap();
        assert_eq!(a.latent, b.latent);
        assert_eq!(a.objective_trace, b.objective_trace);
    }

    #[test]
    fn rank_validation_errors() {
        let x = random_data(19, 4, 6);
        assert!(matches!(
            rmf_fit(&x, 0, 0.1, &FitControls::default()),
            Err(AnimcError::Validation(_))
        ));
        assert!(matches!(
            semi_nmf_fit(&x, 7, &FitControls::default()),
            Err(AnimcError::Validation(_))
        ));
    }
}
