//! Data model: per-view feature matrices, presence masks for missing
//! instances, the factor state shared by all solvers, and hyperparameters.
//!
//! A presence mask stores the binary vector `g` only. The dense mask matrix
//! (one constant column per instance) is never materialized in computation;
//! masking a residual multiplies columns by `g`, which is the same operation.
//! Test oracles are the one place the dense form gets built.

use ndarray::{Array1, Array2, Axis};

use crate::error::{AnimcError, Result};

/// Default floor used wherever a quantity must stay away from zero.
pub const DEFAULT_EPSILON_FLOOR: f64 = 1e-12;

/// One view: a `d_v x n` feature matrix with a human-readable name.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMatrix {
    pub name: String,
    /// Features in rows, instances in columns (`d_v x n`).
    pub data: Array2<f64>,
}

impl ViewMatrix {
    pub fn new(name: impl Into<String>, data: Array2<f64>) -> Self {
        Self { name: name.into(), data }
    }

    /// Feature dimension `d_v`.
    pub fn d(&self) -> usize {
        self.data.nrows()
    }

    /// Instance count `n`.
    pub fn n(&self) -> usize {
        self.data.ncols()
    }
}

/// Presence indicator for one view: `g[i] = 1` when instance `i` is observed.
#[derive(Debug, Clone, PartialEq)]
pub struct PresenceMask {
    g: Vec<f64>,
    d: usize,
}

/// Validate a 0/1 vector and wrap it as a mask for a view with `d` features.
///
/// Entries must be exactly 0 or 1; anything else is a validation error.
pub fn build_presence(g: &[f64], d: usize) -> Result<PresenceMask> {
    for (i, &v) in g.iter().enumerate() {
        if v != 0.0 && v != 1.0 {
            return Err(AnimcError::Validation(format!(
                "presence vector entry {i} is {v}, expected 0 or 1"
            )));
        }
    }
    Ok(PresenceMask { g: g.to_vec(), d })
}

impl PresenceMask {
    /// Mask marking all `n` instances present.
    pub fn all_present(n: usize, d: usize) -> Self {
        Self { g: vec![1.0; n], d }
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_present(&self, i: usize) -> bool {
        self.g[i] != 0.0
    }

    pub fn present_count(&self) -> usize {
        self.g.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn missing_rate(&self) -> f64 {
        if self.g.is_empty() {
            0.0
        } else {
            1.0 - self.present_count() as f64 / self.g.len() as f64
        }
    }

    /// Mark instance `i` absent.
    pub fn set_absent(&mut self, i: usize) {
        self.g[i] = 0.0;
    }

    /// Mark instance `i` present.
    pub fn set_present(&mut self, i: usize) {
        self.g[i] = 1.0;
    }

    /// Diagonal of the selection matrix: just `g` as a vector.
    pub fn t_diag(&self) -> Array1<f64> {
        Array1::from_vec(self.g.clone())
    }

    /// Dense `d x n` mask with constant columns. Only for test oracles;
    /// computation always uses the vector form.
    pub fn materialize(&self) -> Array2<f64> {
        let n = self.g.len();
        Array2::from_shape_fn((self.d, n), |(_, j)| self.g[j])
    }
}

/// A named collection of views over the same `n` instances, with optional
/// ground-truth labels and a target cluster count.
#[derive(Debug, Clone)]
pub struct MultiViewDataset {
    pub name: String,
    pub views: Vec<(ViewMatrix, PresenceMask)>,
    pub labels: Option<Vec<usize>>,
    pub c: usize,
}

impl MultiViewDataset {
    pub fn m(&self) -> usize {
        self.views.len()
    }

    pub fn n(&self) -> usize {
        self.views.first().map_or(0, |(x, _)| x.n())
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(|(x, _)| x.d()).collect()
    }
}

/// Factor state: per-view bases `U_v` and regression factors `A_v`, the
/// shared nonnegative latent `V` (`n x c`), and per-view weights `w`.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub u: Vec<Array2<f64>>,
    pub a: Vec<Array2<f64>>,
    /// Shared latent representation, one row per instance, entrywise `>= 0`.
    pub v: Array2<f64>,
    pub w: Vec<f64>,
}

impl ModelState {
    pub fn c(&self) -> usize {
        self.v.ncols()
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }
}

/// Scalar knobs shared by the solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub alpha: f64,
    pub beta: f64,
    /// Exponent on the per-view residual norm, in `(0, 2]`.
    pub r: f64,
    pub theta_v: f64,
    pub theta_a: f64,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub epsilon_floor: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 10.0,
            r: 0.2,
            theta_v: 0.01,
            theta_a: 100.0,
            max_iter: 40,
            rel_tol: 1e-6,
            epsilon_floor: DEFAULT_EPSILON_FLOOR,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(AnimcError::Domain(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(AnimcError::Domain(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if !(self.r > 0.0 && self.r <= 2.0) {
            return Err(AnimcError::Domain(format!("r must lie in (0, 2], got {}", self.r)));
        }
        if !(self.theta_v > 0.0) {
            return Err(AnimcError::Domain(format!("theta_v must be > 0, got {}", self.theta_v)));
        }
        if !(self.theta_a > 0.0) {
            return Err(AnimcError::Domain(format!("theta_a must be > 0, got {}", self.theta_a)));
        }
        if self.max_iter == 0 {
            return Err(AnimcError::Domain("max_iter must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(AnimcError::Domain(format!("rel_tol must be finite and > 0, got {}", self.rel_tol)));
        }
        if !(self.epsilon_floor > 0.0 && self.epsilon_floor.is_finite()) {
            return Err(AnimcError::Domain(format!(
                "epsilon_floor must be finite and > 0, got {}",
                self.epsilon_floor
            )));
        }
        Ok(())
    }
}

/// Masked reconstruction residual for one view: columns of `X - U V^T`
/// scaled by the presence indicator, so absent instances contribute zero.
pub fn masked_residual(
    x: &ViewMatrix,
    mask: &PresenceMask,
    u: &Array2<f64>,
    v: &Array2<f64>,
) -> Result<Array2<f64>> {
    if mask.n() != x.n() {
        return Err(AnimcError::Dimension(format!(
            "mask length {} does not match instance count {}",
            mask.n(),
            x.n()
        )));
    }
    if u.nrows() != x.d() || v.nrows() != x.n() || u.ncols() != v.ncols() {
        return Err(AnimcError::Dimension(format!(
            "factor shapes U {}x{}, V {}x{} do not reconstruct a {}x{} view",
            u.nrows(),
            u.ncols(),
            v.nrows(),
            v.ncols(),
            x.d(),
            x.n()
        )));
    }
    let mut e = &x.data - &u.dot(&v.t());
    scale_columns_in_place(&mut e, mask.g());
    Ok(e)
}

/// Scale the columns of `e` by the presence indicator (right-multiplication
/// by the selection diagonal).
pub fn residual_times_t(e: &Array2<f64>, mask: &PresenceMask) -> Result<Array2<f64>> {
    if e.ncols() != mask.n() {
        return Err(AnimcError::Dimension(format!(
            "matrix has {} columns but mask covers {} instances",
            e.ncols(),
            mask.n()
        )));
    }
    let mut out = e.clone();
    scale_columns_in_place(&mut out, mask.g());
    Ok(out)
}

pub(crate) fn scale_columns_in_place(e: &mut Array2<f64>, g: &[f64]) {
    for (mut col, &gi) in e.axis_iter_mut(Axis(1)).zip(g.iter()) {
        if gi == 0.0 {
            col.fill(0.0);
        } else if gi != 1.0 {
            col.mapv_inplace(|v| v * gi);
        }
    }
}

/// Per-view summary produced by dataset validation.
#[derive(Debug, Clone)]
pub struct ViewSummary {
    pub name: String,
    pub d: usize,
    pub present: usize,
    pub missing_rate: f64,
}

/// Structural summary of a dataset that passed validation.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub n: usize,
    pub m: usize,
    pub c: usize,
    pub views: Vec<ViewSummary>,
    pub has_labels: bool,
}

/// Check structural consistency: equal instance counts, masks aligned with
/// views, finite entries, every instance present somewhere, labels in range.
pub fn validate_dataset(ds: &MultiViewDataset) -> Result<ValidationReport> {
    if ds.views.is_empty() {
        return Err(AnimcError::Validation("dataset has no views".into()));
    }
    if ds.c < 1 {
        return Err(AnimcError::Validation("cluster count must be at least 1".into()));
    }
    let n = ds.views[0].0.n();
    if n == 0 {
        return Err(AnimcError::Validation("dataset has no instances".into()));
    }
    let mut views = Vec::with_capacity(ds.views.len());
    for (idx, (x, mask)) in ds.views.iter().enumerate() {
        if x.n() != n {
            return Err(AnimcError::Validation(format!(
                "view {idx} ({}) has {} instances but view 0 has {n}",
                x.name,
                x.n()
            )));
        }
        if mask.n() != n {
            return Err(AnimcError::Validation(format!(
                "view {idx} ({}) mask covers {} instances, expected {n}",
                x.name,
                mask.n()
            )));
        }
        if mask.d() != x.d() {
            return Err(AnimcError::Validation(format!(
                "view {idx} ({}) mask is for {} features but the view has {}",
                x.name,
                mask.d(),
                x.d()
            )));
        }
        if x.d() == 0 {
            return Err(AnimcError::Validation(format!("view {idx} ({}) has no features", x.name)));
        }
        if let Some(bad) = x.data.iter().find(|v| !v.is_finite()) {
            return Err(AnimcError::Validation(format!(
                "view {idx} ({}) contains a nonfinite entry {bad}",
                x.name
            )));
        }
        views.push(ViewSummary {
            name: x.name.clone(),
            d: x.d(),
            present: mask.present_count(),
            missing_rate: mask.missing_rate(),
        });
    }
    for i in 0..n {
        if !ds.views.iter().any(|(_, mask)| mask.is_present(i)) {
            return Err(AnimcError::Validation(format!(
                "instance {i} is absent from every view"
            )));
        }
    }
    if let Some(labels) = &ds.labels {
        if labels.len() != n {
            return Err(AnimcError::Validation(format!(
                "label vector has {} entries for {n} instances",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= ds.c) {
            return Err(AnimcError::Validation(format!(
                "label {bad} is outside 0..{}",
                ds.c
            )));
        }
    }
    Ok(ValidationReport {
        n,
        m: ds.views.len(),
        c: ds.c,
        views,
        has_labels: ds.labels.is_some(),
    })
}
