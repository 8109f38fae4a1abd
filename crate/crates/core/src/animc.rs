//! The auto-weighted multi-view optimizer. Each sweep updates, in order:
//! the per-view bases (a small Sylvester-type solve), the per-view
//! regression factors (a majorized ridge solve), the shared nonnegative
//! latent matrix (a multiplicative step), a column rescaling that moves
//! scale from the latent matrix into the bases, and finally the view
//! weights, which fall out of the optimality condition of a residual-power
//! objective rather than being tuned by hand.
//!
//! Absent instances are handled by scaling residual columns with the
//! presence indicator, so every update sees only observed data.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{
    masked_residual, validate_dataset, Hyperparams, ModelState, MultiViewDataset,
};
use crate::error::{AnimcError, Result};
use crate::metrics::kmeans;
use crate::norms::{frobenius_norm, theta_diag, theta_norm};
use crate::solvers::{solve_a_woodbury, solve_sylvester, SylvesterProblem};

/// How cluster labels are read out of the fitted latent matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// k-means on the rows of the latent matrix.
    Kmeans,
    /// Index of the largest entry in each row.
    Argmax,
}

/// Everything the solver needs besides the data.
#[derive(Debug, Clone)]
pub struct AnimcConfig {
    pub hp: Hyperparams,
    /// Cap each weight at the inverse square root of the full residual
    /// norm, which stops a nearly-empty view from grabbing all the weight.
    pub enable_soft_boundary: bool,
    /// Use half the boundary value as the cap instead.
    pub half_boundary_cap: bool,
    /// Keep weights at their initial value for the whole run.
    pub freeze_weights: bool,
    /// Starting weight per view; the default is one over the view count.
    pub initial_weight: Option<f64>,
    pub label_mode: LabelMode,
    pub seed: u64,
}

impl Default for AnimcConfig {
    fn default() -> Self {
        Self {
            hp: Hyperparams::default(),
            enable_soft_boundary: true,
            half_boundary_cap: false,
            freeze_weights: false,
            initial_weight: None,
            label_mode: LabelMode::Kmeans,
            seed: 0,
        }
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Sweep index; 0 is the freshly initialized state.
    pub iter: usize,
    /// The weighted objective the sweeps minimize.
    pub objective: f64,
    /// The residual-power surrogate objective, recorded for diagnostics.
    pub r_objective: f64,
    pub weights: Vec<f64>,
    /// Masked residual Frobenius norm per view.
    pub view_residuals: Vec<f64>,
}

/// A fitted model with its convergence history.
#[derive(Debug, Clone)]
pub struct AnimcFit {
    pub state: ModelState,
    pub trace: Vec<IterationRecord>,
    pub iterations_run: usize,
}

/// Options for the weight update.
#[derive(Debug, Clone, Copy)]
pub struct WeightOptions {
    pub soft_boundary: bool,
    pub half_cap: bool,
    pub floor: f64,
}

impl Default for WeightOptions {
    fn default() -> Self {
        Self {
            soft_boundary: true,
            half_cap: false,
            floor: crate::data::DEFAULT_EPSILON_FLOOR,
        }
    }
}

fn scale_rows_by(a: &Array2<f64>, g: &[f64]) -> Array2<f64> {
    let mut out = a.clone();
    for (mut row, &f) in out.rows_mut().into_iter().zip(g.iter()) {
        if f == 0.0 {
            row.fill(0.0);
        } else if f != 1.0 {
            row.mapv_inplace(|v| v * f);
        }
    }
    out
}

fn check_state(ds: &MultiViewDataset, state: &ModelState) -> Result<()> {
    if state.u.len() != ds.m() || state.a.len() != ds.m() || state.w.len() != ds.m() {
        return Err(AnimcError::Dimension(format!(
            "state covers {} views, dataset has {}",
            state.u.len(),
            ds.m()
        )));
    }
    if state.v.nrows() != ds.n() {
        return Err(AnimcError::Dimension(format!(
            "latent matrix has {} rows for {} instances",
            state.v.nrows(),
            ds.n()
        )));
    }
    Ok(())
}

/// The weighted objective: per-view masked reconstruction, alignment of
/// each regression factor with its basis, the structural penalty on the
/// regression factors, and the row penalty on the latent matrix.
pub fn objective(ds: &MultiViewDataset, state: &ModelState, hp: &Hyperparams) -> Result<f64> {
    check_state(ds, state)?;
    let c = state.c();
    let eye: Array2<f64> = Array2::eye(c);
    let mut total = 0.0;
    for (v, (x, mask)) in ds.views.iter().enumerate() {
        let e = masked_residual(x, mask, &state.u[v], &state.v)?;
        let data = state.w[v] * frobenius_norm(&e).powi(2);
        if !data.is_finite() {
            return Err(AnimcError::Numeric(format!(
                "masked data term for view {v} is nonfinite"
            )));
        }
        let align = &state.a[v].t().dot(&state.u[v]) - &eye;
        let align_term = hp.alpha * frobenius_norm(&align).powi(2);
        if !align_term.is_finite() {
            return Err(AnimcError::Numeric(format!(
                "alignment term for view {v} is nonfinite"
            )));
        }
        let structural = hp.beta * theta_norm(&state.a[v], hp.theta_a)?;
        if !structural.is_finite() {
            return Err(AnimcError::Numeric(format!(
                "structural penalty for view {v} is nonfinite"
            )));
        }
        total += data + align_term + structural;
    }
    let latent = hp.alpha * theta_norm(&state.v, hp.theta_v)?;
    if !latent.is_finite() {
        return Err(AnimcError::Numeric("latent penalty is nonfinite".into()));
    }
    Ok(total + latent)
}

/// The residual-power surrogate the weights implicitly minimize: per view,
/// the masked residual norm raised to `r` plus ridge penalties on the
/// factors.
pub fn r_objective(
    ds: &MultiViewDataset,
    u: &[Array2<f64>],
    v: &Array2<f64>,
    alpha: f64,
    r: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (idx, (x, mask)) in ds.views.iter().enumerate() {
        let e = masked_residual(x, mask, &u[idx], v)?;
        total += frobenius_norm(&e).powf(r)
            + alpha * (frobenius_norm(&u[idx]).powi(2) + frobenius_norm(v).powi(2));
    }
    Ok(total)
}

/// Closed-form weights from the optimality condition of the residual-power
/// objective, optionally capped at the boundary value derived from the
/// full (unmasked) residual.
pub fn update_weights(
    ds: &MultiViewDataset,
    state: &ModelState,
    r: f64,
    opts: &WeightOptions,
) -> Result<Vec<f64>> {
    check_state(ds, state)?;
    let mut w = Vec::with_capacity(ds.m());
    for (v, (x, mask)) in ds.views.iter().enumerate() {
        let e = masked_residual(x, mask, &state.u[v], &state.v)?;
        let masked_norm = frobenius_norm(&e).max(opts.floor);
        let value = 0.5 * r * masked_norm.powf(0.5 * r - 1.0);
        let next = if opts.soft_boundary {
            let full = &x.data - &state.u[v].dot(&state.v.t());
            let full_norm = frobenius_norm(&full).max(opts.floor);
            let cap = full_norm.powf(-0.5) * if opts.half_cap { 0.5 } else { 1.0 };
            value.min(cap)
        } else {
            value
        };
        if !next.is_finite() {
            return Err(AnimcError::Numeric(format!(
                "weight for view {v} is nonfinite"
            )));
        }
        w.push(next);
    }
    Ok(w)
}

/// Per-view basis update: each `U_v` solves
/// `U (w_v V^T T_v V) + (alpha A_v A_v^T) U = alpha A_v + w_v X_v T_v V`,
/// the stationarity condition of the objective in `U_v` alone.
pub fn update_u(
    ds: &MultiViewDataset,
    state: &ModelState,
    hp: &Hyperparams,
) -> Result<Vec<Array2<f64>>> {
    check_state(ds, state)?;
    let mut out = Vec::with_capacity(ds.m());
    for (v, (x, mask)) in ds.views.iter().enumerate() {
        let vg = scale_rows_by(&state.v, mask.g());
        let mut m = state.v.t().dot(&vg) * state.w[v];
        // Clear floating-point asymmetry before the symmetric solve.
        m = (&m + &m.t()) * 0.5;
        let mut n = state.a[v].dot(&state.a[v].t()) * hp.alpha;
        n = (&n + &n.t()) * 0.5;
        let c = &state.a[v] * hp.alpha + &x.data.dot(&vg) * state.w[v];
        let problem = SylvesterProblem::new(m, n, c)?;
        out.push(solve_sylvester(&problem)?);
    }
    Ok(out)
}

/// Per-view regression factor update: one majorized ridge solve around the
/// current factor, through the inverted route.
pub fn update_a(state: &ModelState, hp: &Hyperparams) -> Result<Vec<Array2<f64>>> {
    let mut out = Vec::with_capacity(state.a.len());
    for (u, a) in state.u.iter().zip(state.a.iter()) {
        let d_a = theta_diag(a, hp.theta_a, hp.epsilon_floor)?;
        out.push(solve_a_woodbury(u, &d_a, hp.alpha, hp.beta)?);
    }
    Ok(out)
}

/// Multiplicative latent update. Positive and negative parts of each
/// view's basis Gram matrix are split so that every factor in the ratio is
/// nonnegative; the row penalty enters the denominator through its
/// majorizer diagonal. Entrywise, the latent matrix is scaled by the
/// square root of (positive pressure / negative pressure), which keeps it
/// nonnegative and shrinks the per-sweep objective.
pub fn update_v(
    ds: &MultiViewDataset,
    state: &ModelState,
    hp: &Hyperparams,
) -> Result<Array2<f64>> {
    check_state(ds, state)?;
    let (n, c) = (state.v.nrows(), state.v.ncols());
    let split_pos = |b: &Array2<f64>| b.mapv(|x| (x.abs() + x) * 0.5);
    let split_neg = |b: &Array2<f64>| b.mapv(|x| (x.abs() - x) * 0.5);

    let dv = theta_diag(&state.v, hp.theta_v, hp.epsilon_floor)?;
    let mut z1: Array2<f64> = Array2::zeros((n, c));
    let mut pos: Array2<f64> = Array2::zeros((n, c));
    let mut neg: Array2<f64> = Array2::zeros((n, c));
    for i in 0..n {
        for j in 0..c {
            pos[[i, j]] = hp.alpha * dv.diag[i] * state.v[[i, j]];
        }
    }
    for (v, (x, mask)) in ds.views.iter().enumerate() {
        let w = state.w[v];
        let xtu = x.data.t().dot(&state.u[v]);
        z1 = z1 + scale_rows_by(&xtu, mask.g()) * w;
        let gram = state.u[v].t().dot(&state.u[v]);
        let vp = state.v.dot(&split_pos(&gram));
        let vm = state.v.dot(&split_neg(&gram));
        pos = pos + scale_rows_by(&vp, mask.g()) * w;
        neg = neg + scale_rows_by(&vm, mask.g()) * w;
    }
    let num = split_pos(&z1) + neg;
    let den = (split_neg(&z1) + pos).mapv(|x| x.max(hp.epsilon_floor));
    let mut out = state.v.clone();
    for i in 0..n {
        for j in 0..c {
            let ratio = num[[i, j]] / den[[i, j]];
            out[[i, j]] *= ratio.sqrt();
            if !out[[i, j]].is_finite() {
                return Err(AnimcError::Numeric(format!(
                    "latent update produced a nonfinite entry at ({i},{j})"
                )));
            }
        }
    }
    Ok(out)
}

/// Move column scale from the latent matrix into the bases: each latent
/// column is divided by its (floored) column sum and the matching basis
/// columns are multiplied by it, leaving every product `U_v V^T` unchanged.
pub fn normalize(state: &mut ModelState, floor: f64) {
    let q: Array1<f64> = state
        .v
        .columns()
        .into_iter()
        .map(|col| col.sum().max(floor))
        .collect();
    for u in state.u.iter_mut() {
        for (mut col, &s) in u.columns_mut().into_iter().zip(q.iter()) {
            col.mapv_inplace(|v| v * s);
        }
    }
    for (mut col, &s) in state.v.columns_mut().into_iter().zip(q.iter()) {
        col.mapv_inplace(|v| v / s);
    }
}

/// Run the alternating optimization from a seeded random start.
///
/// Initialization draws the latent matrix uniformly inside the feasible
/// region, starts every weight at the same value, seeds the regression
/// factors near zero, and takes one basis solve plus one regression solve
/// before the first sweep. The trace gets a record for the initial state
/// and one per sweep; the run stops when the objective change falls below
/// the relative tolerance or the sweep budget runs out.
pub fn fit(ds: &MultiViewDataset, config: &AnimcConfig) -> Result<AnimcFit> {
    validate_dataset(ds)?;
    config.hp.validate()?;
    let hp = &config.hp;
    let (n, m, c) = (ds.n(), ds.m(), ds.c);
    if let Some(w0) = config.initial_weight {
        if !(w0 > 0.0 && w0.is_finite()) {
            return Err(AnimcError::Domain(format!(
                "initial weight must be finite and > 0, got {w0}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let v0 = Array2::from_shape_fn((n, c), |_| rng.random_range(0.1..1.0));
    let w0 = vec![config.initial_weight.unwrap_or(1.0 / m as f64); m];
    let a0: Vec<Array2<f64>> = ds
        .views
        .iter()
        .map(|(x, _)| Array2::from_shape_fn((x.d(), c), |_| rng.random_range(0.0..0.01)))
        .collect();

    let u_placeholder: Vec<Array2<f64>> = ds
        .views
        .iter()
        .map(|(x, _)| Array2::zeros((x.d(), c)))
        .collect();
    let mut state = ModelState { u: u_placeholder, a: a0.clone(), v: v0, w: w0 };
    state.u = update_u(ds, &state, hp)?;
    for (idx, a_init) in a0.iter().enumerate() {
        let d_a = theta_diag(a_init, hp.theta_a, hp.epsilon_floor)?;
        state.a[idx] = solve_a_woodbury(&state.u[idx], &d_a, hp.alpha, hp.beta)?;
    }

    let weight_opts = WeightOptions {
        soft_boundary: config.enable_soft_boundary,
        half_cap: config.half_boundary_cap,
        floor: hp.epsilon_floor,
    };
    let record = |st: &ModelState, iter: usize| -> Result<IterationRecord> {
        let mut residuals = Vec::with_capacity(m);
        for (v, (x, mask)) in ds.views.iter().enumerate() {
            let e = masked_residual(x, mask, &st.u[v], &st.v)?;
            residuals.push(frobenius_norm(&e));
        }
        Ok(IterationRecord {
            iter,
            objective: objective(ds, st, hp)?,
            r_objective: r_objective(ds, &st.u, &st.v, hp.alpha, hp.r)?,
            weights: st.w.clone(),
            view_residuals: residuals,
        })
    };

    let mut trace = vec![record(&state, 0)?];
    let mut prev = trace[0].objective;
    let mut iterations_run = hp.max_iter;
    for t in 1..=hp.max_iter {
        state.u = update_u(ds, &state, hp)?;
        state.a = update_a(&state, hp)?;
        state.v = update_v(ds, &state, hp)?;
        normalize(&mut state, hp.epsilon_floor);
        if !config.freeze_weights {
            state.w = update_weights(ds, &state, hp.r, &weight_opts)?;
        }
        let rec = record(&state, t)?;
        let current = rec.objective;
        trace.push(rec);
        if (prev - current).abs() <= hp.rel_tol * prev.abs().max(1.0) {
            iterations_run = t;
            break;
        }
        prev = current;
    }
    Ok(AnimcFit { state, trace, iterations_run })
}

/// Read cluster labels out of a fitted latent matrix.
pub fn predict_labels(
    state: &ModelState,
    c: usize,
    mode: LabelMode,
    seed: u64,
) -> Result<Vec<usize>> {
    match mode {
        LabelMode::Kmeans => kmeans(&state.v, c, 10, seed),
        LabelMode::Argmax => Ok(state
            .v
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
                        if x > bv {
                            (i, x)
                        } else {
                            (bi, bv)
                        }
                    })
                    .0
            })
            .collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_presence, PresenceMask, ViewMatrix};
    use crate::perturb::{apply_missing, synth_generate};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn single_view_dataset(x: Array2<f64>, g: &[f64], c: usize) -> MultiViewDataset {
        let d = x.nrows();
        MultiViewDataset {
            name: "test".into(),
            views: vec![(ViewMatrix::new("v0", x), build_presence(g, d).unwrap())],
            labels: None,
            c,
        }
    }

    fn zero_state(ds: &MultiViewDataset) -> ModelState {
        ModelState {
            u: ds.views.iter().map(|(x, _)| Array2::zeros((x.d(), ds.c))).collect(),
            a: ds.views.iter().map(|(x, _)| Array2::zeros((x.d(), ds.c))).collect(),
            v: Array2::zeros((ds.n(), ds.c)),
            w: vec![1.0 / ds.m() as f64; ds.m()],
        }
    }

    #[test]
    fn objective_of_all_zero_factors_is_alignment_only() {
        // Zero data and zero factors leave only the alignment residual,
        // which is the identity per view: alpha * m * c in total.
        let x0 = Array2::zeros((3, 4));
        let x1 = Array2::zeros((2, 4));
        let ds = MultiViewDataset {
            name: "zeros".into(),
            views: vec![
                (ViewMatrix::new("a", x0), PresenceMask::all_present(4, 3)),
                (ViewMatrix::new("b", x1), PresenceMask::all_present(4, 2)),
            ],
            labels: None,
            c: 2,
        };
        let state = zero_state(&ds);
        let hp = Hyperparams::default();
        let got = objective(&ds, &state, &hp).unwrap();
        assert_abs_diff_eq!(got, hp.alpha * 2.0 * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn weight_value_at_unit_exponent() {
        // Residual norm 4 with r = 1 gives 0.5 * 4^(-0.5) = 0.25, below
        // the boundary value 4^(-0.5) = 0.5.
        let ds = single_view_dataset(array![[4.0]], &[1.0], 1);
        let state = zero_state(&ds);
        let w = update_weights(&ds, &state, 1.0, &WeightOptions::default()).unwrap();
        assert_abs_diff_eq!(w[0], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn weight_value_at_square_exponent_hits_the_cap() {
        // r = 2 makes the interior value exactly 1 regardless of the
        // residual, so the boundary cap is what limits it.
        let ds = single_view_dataset(array![[4.0]], &[1.0], 1);
        let state = zero_state(&ds);
        let w = update_weights(&ds, &state, 2.0, &WeightOptions::default()).unwrap();
        assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-12);
        let unbounded = update_weights(
            &ds,
            &state,
            2.0,
            &WeightOptions { soft_boundary: false, ..Default::default() },
        )
        .unwrap();
        assert_abs_diff_eq!(unbounded[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn heavily_masked_view_takes_the_boundary_value() {
        // The masked residual is tiny but the full residual is huge, so the
        // interior value exceeds the cap and the cap wins.
        let ds = single_view_dataset(array![[4.0, 100.0]], &[1.0, 0.0], 1);
        let state = zero_state(&ds);
        let w = update_weights(&ds, &state, 2.0, &WeightOptions::default()).unwrap();
        let full = (16.0f64 + 10000.0).sqrt();
        assert_abs_diff_eq!(w[0], full.powf(-0.5), epsilon = 1e-12);
        let half = update_weights(
            &ds,
            &state,
            2.0,
            &WeightOptions { half_cap: true, ..Default::default() },
        )
        .unwrap();
        assert_abs_diff_eq!(half[0], 0.5 * full.powf(-0.5), epsilon = 1e-12);
    }

    #[test]
    fn basis_update_without_alignment_is_least_squares() {
        // alpha = 0 on a complete view reduces the basis solve to the
        // normal equations of plain least squares.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((5, 8), |_| rng.random_range(-1.0..1.0));
        let v = Array2::from_shape_fn((8, 3), |_| rng.random_range(0.1..1.0));
        let ds = single_view_dataset(x.clone(), &[1.0; 8], 3);
        let mut state = zero_state(&ds);
        state.v = v.clone();
        state.w = vec![0.7];
        let mut hp = Hyperparams::default();
        hp.alpha = 0.0;
        let u = update_u(&ds, &state, &hp).unwrap();
        let expected = crate::solvers::solve_spd(&v.t().dot(&v), &v.t().dot(&x.t()))
            .unwrap()
            .t()
            .to_owned();
        assert!(
            frobenius_norm(&(&u[0] - &expected)) <= 1e-8 * (1.0 + frobenius_norm(&expected))
        );
    }

    #[test]
    fn basis_update_with_zero_weight_aligns_to_regression_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((6, 5), |_| rng.random_range(-1.0..1.0));
        let ds = single_view_dataset(x, &[1.0; 5], 2);
        let mut state = zero_state(&ds);
        state.v = Array2::from_shape_fn((5, 2), |_| rng.random_range(0.1..1.0));
        state.a = vec![Array2::from_shape_fn((6, 2), |_| rng.random_range(-1.0..1.0))];
        state.w = vec![0.0];
        let hp = Hyperparams::default();
        let u = update_u(&ds, &state, &hp).unwrap();
        let atu = state.a[0].t().dot(&u[0]);
        assert!(
            frobenius_norm(&(&atu - &Array2::<f64>::eye(2))) <= 1e-6,
            "alignment residual {}",
            frobenius_norm(&(&atu - &Array2::<f64>::eye(2)))
        );
    }

    #[test]
    fn regression_update_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ds = single_view_dataset(
            Array2::from_shape_fn((6, 5), |_| rng.random_range(-1.0..1.0)),
            &[1.0; 5],
            2,
        );
        let mut state = zero_state(&ds);
        state.u = vec![Array2::from_shape_fn((6, 2), |_| rng.random_range(-1.0..1.0))];
        state.a = vec![Array2::from_shape_fn((6, 2), |_| rng.random_range(0.0..0.01))];
        // Vanishing structural penalty: the factor aligns with the basis.
        let mut hp = Hyperparams::default();
        hp.beta = 1e-12;
        let a = update_a(&state, &hp).unwrap();
        let atu = a[0].t().dot(&state.u[0]);
        assert!(frobenius_norm(&(&atu - &Array2::<f64>::eye(2))) <= 1e-5);
        // No alignment term: the factor collapses to zero.
        hp = Hyperparams::default();
        hp.alpha = 0.0;
        let a = update_a(&state, &hp).unwrap();
        assert_eq!(a[0], Array2::<f64>::zeros((6, 2)));
    }

    #[test]
    fn latent_update_keeps_nonnegativity_and_descends() {
        // Per-sweep objective in the latent matrix alone: the weighted
        // masked residual plus the row penalty must not increase.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..10 {
            let n = 12;
            let x = Array2::from_shape_fn((7, n), |_| rng.random_range(-2.0..2.0));
            let g: Vec<f64> = (0..n).map(|i| if i % 4 == trial % 4 { 0.0 } else { 1.0 }).collect();
            let ds = single_view_dataset(x, &g, 3);
            let mut state = zero_state(&ds);
            state.u = vec![Array2::from_shape_fn((7, 3), |_| rng.random_range(-1.0..1.0))];
            state.v = Array2::from_shape_fn((n, 3), |_| rng.random_range(0.1..1.0));
            state.w = vec![rng.random_range(0.1..1.0)];
            let hp = Hyperparams::default();
            let part = |v: &Array2<f64>| -> f64 {
                let e = masked_residual(&ds.views[0].0, &ds.views[0].1, &state.u[0], v).unwrap();
                state.w[0] * frobenius_norm(&e).powi(2)
                    + hp.alpha * theta_norm(v, hp.theta_v).unwrap()
            };
            let before = part(&state.v);
            let next = update_v(&ds, &state, &hp).unwrap();
            assert!(next.iter().all(|&v| v >= 0.0));
            let after = part(&next);
            assert!(
                after <= before + 1e-9 * before.abs().max(1.0),
                "latent step rose from {before} to {after} (trial {trial})"
            );
        }
    }

    #[test]
    fn normalization_preserves_reconstruction_and_unit_column_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut state = ModelState {
            u: vec![Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0))],
            a: vec![Array2::zeros((5, 3))],
            v: Array2::from_shape_fn((8, 3), |_| rng.random_range(0.1..2.0)),
            w: vec![1.0],
        };
        let before = state.u[0].dot(&state.v.t());
        normalize(&mut state, 1e-12);
        let after = state.u[0].dot(&state.v.t());
        assert!(frobenius_norm(&(&before - &after)) <= 1e-12 * (1.0 + frobenius_norm(&before)));
        for col in state.v.columns() {
            assert_abs_diff_eq!(col.sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn fit_is_bitwise_deterministic() {
        let ds = synth_generate(40, 2, 3, &[6, 8], 4.0, 9).unwrap();
        let ds = apply_missing(&ds, 0.2, 1).unwrap();
        let config = AnimcConfig { seed: 5, ..Default::default() };
        let a = fit(&ds, &config).unwrap();
        let b = fit(&ds, &config).unwrap();
        assert_eq!(a.state.v, b.state.v);
        assert_eq!(a.state.w, b.state.w);
        assert_eq!(a.iterations_run, b.iterations_run);
        assert_eq!(a.trace.len(), b.trace.len());
        for (ra, rb) in a.trace.iter().zip(b.trace.iter()) {
            assert_eq!(ra.objective, rb.objective);
        }
    }

    #[test]
    fn fit_keeps_latent_nonnegative_and_weights_positive() {
        let ds = synth_generate(30, 2, 3, &[6, 7], 4.0, 11).unwrap();
        let config = AnimcConfig::default();
        let out = fit(&ds, &config).unwrap();
        assert!(out.state.v.iter().all(|&v| v >= 0.0));
        assert!(out.state.w.iter().all(|&w| w > 0.0));
        assert!(out.trace.len() <= config.hp.max_iter + 1);
        assert_eq!(out.trace.len(), out.iterations_run + 1);
    }

    #[test]
    fn frozen_weight_trace_is_nonincreasing() {
        for seed in 0..5 {
            let ds = synth_generate(40, 2, 3, &[6, 8], 4.0, seed).unwrap();
            let ds = apply_missing(&ds, 0.3, seed).unwrap();
            let config = AnimcConfig { freeze_weights: true, seed, ..Default::default() };
            let out = fit(&ds, &config).unwrap();
            // Weights never moved.
            for rec in &out.trace {
                assert_eq!(rec.weights, vec![0.5, 0.5]);
            }
            for pair in out.trace.windows(2) {
                assert!(
                    pair[1].objective <= pair[0].objective * (1.0 + 1e-6) + 1e-9,
                    "objective rose from {} to {} at iter {} (seed {seed})",
                    pair[0].objective,
                    pair[1].objective,
                    pair[1].iter
                );
            }
        }
    }

    #[test]
    fn argmax_labels_pick_largest_latent_entry() {
        let state = ModelState {
            u: vec![],
            a: vec![],
            v: array![[0.1, 0.9], [0.8, 0.2], [0.5, 0.5]],
            w: vec![],
        };
        let labels = predict_labels(&state, 2, LabelMode::Argmax, 0).unwrap();
        assert_eq!(labels, vec![1, 0, 0]);
    }

    #[test]
    fn noisier_view_gets_smaller_weight() {
        // Second view carries far more observation noise by construction.
        let ds = synth_generate(60, 2, 3, &[8, 10], 5.0, 21).unwrap();
        let out = fit(&ds, &AnimcConfig::default()).unwrap();
        assert!(
            out.state.w[1] < out.state.w[0],
            "weights {:?} not ordered by noise",
            out.state.w
        );
    }
}
