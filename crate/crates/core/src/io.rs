//! File formats: datasets and fitted states as JSON, traces as CSV.
//!
//! Floats in JSON are written in scientific notation with 17 significant
//! digits, which identifies every binary double exactly, so a
//! write-read-write cycle reproduces the file byte for byte. Field order
//! is fixed by the struct definitions and the output carries no
//! nondeterministic content.

use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::animc::{AnimcConfig, IterationRecord, LabelMode};
use crate::data::{
    build_presence, validate_dataset, Hyperparams, MultiViewDataset, ViewMatrix,
};
use crate::error::{AnimcError, Result};

/// JSON formatter that writes every float with full round-trip precision.
struct SciFloats;

impl serde_json::ser::Formatter for SciFloats {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize any value to JSON with the fixed float convention.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFloats);
    value
        .serialize(&mut ser)
        .map_err(|e| AnimcError::Format(format!("serialization failed: {e}")))?;
    String::from_utf8(out).map_err(|e| AnimcError::Format(format!("invalid utf8: {e}")))
}

#[derive(Serialize, Deserialize)]
struct ViewFileModel {
    name: String,
    d: usize,
    present: Vec<u8>,
    data: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFileModel {
    name: String,
    n: usize,
    c: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<usize>>,
    views: Vec<ViewFileModel>,
}

fn matrix_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn rows_matrix(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    if rows.is_empty() {
        return Err(AnimcError::Format(format!("{what} has no rows")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(AnimcError::Format(format!("{what} rows have unequal lengths")));
    }
    let mut out = Array2::zeros((rows.len(), ncols));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(AnimcError::Format(format!(
                    "{what} contains a nonfinite value at ({i},{j})"
                )));
            }
            out[[i, j]] = v;
        }
    }
    Ok(out)
}

fn check_finite(a: &Array2<f64>, what: &str) -> Result<()> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(AnimcError::Numeric(format!("{what} contains a nonfinite value")));
    }
    Ok(())
}

/// Serialize a dataset to the canonical JSON layout.
pub fn dataset_to_json(ds: &MultiViewDataset) -> Result<String> {
    validate_dataset(ds)?;
    let model = DatasetFileModel {
        name: ds.name.clone(),
        n: ds.n(),
        c: ds.c,
        labels: ds.labels.clone(),
        views: ds
            .views
            .iter()
            .map(|(x, mask)| ViewFileModel {
                name: x.name.clone(),
                d: x.d(),
                present: mask.g().iter().map(|&g| g as u8).collect(),
                data: matrix_rows(&x.data),
            })
            .collect(),
    };
    to_canonical_json(&model)
}

/// Parse a dataset from its JSON layout, validating structure.
pub fn dataset_from_json(text: &str) -> Result<MultiViewDataset> {
    let model: DatasetFileModel =
        serde_json::from_str(text).map_err(|e| AnimcError::Format(format!("bad dataset file: {e}")))?;
    let mut views = Vec::with_capacity(model.views.len());
    for vm in &model.views {
        let data = rows_matrix(&vm.data, &format!("view {}", vm.name))?;
        if data.nrows() != vm.d {
            return Err(AnimcError::Format(format!(
                "view {} declares {} features but carries {} rows",
                vm.name,
                vm.d,
                data.nrows()
            )));
        }
        if data.ncols() != model.n {
            return Err(AnimcError::Format(format!(
                "view {} carries {} instances, file declares {}",
                vm.name,
                data.ncols(),
                model.n
            )));
        }
        if vm.present.len() != model.n {
            return Err(AnimcError::Format(format!(
                "view {} presence vector has {} entries for {} instances",
                vm.name,
                vm.present.len(),
                model.n
            )));
        }
        if let Some(&bad) = vm.present.iter().find(|&&b| b > 1) {
            return Err(AnimcError::Format(format!(
                "view {} presence vector contains {bad}, expected 0 or 1",
                vm.name
            )));
        }
        let g: Vec<f64> = vm.present.iter().map(|&b| b as f64).collect();
        views.push((ViewMatrix::new(vm.name.clone(), data), build_presence(&g, vm.d)?));
    }
    let ds = MultiViewDataset {
        name: model.name,
        views,
        labels: model.labels,
        c: model.c,
    };
    validate_dataset(&ds)?;
    Ok(ds)
}

/// Write a dataset file.
pub fn save_dataset(ds: &MultiViewDataset, path: &Path) -> Result<()> {
    let text = dataset_to_json(ds)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Read a dataset file.
pub fn load_dataset(path: &Path) -> Result<MultiViewDataset> {
    let text = std::fs::read_to_string(path)?;
    dataset_from_json(&text)
}

/// Everything needed to reproduce and evaluate a fit: the configuration
/// echo, the seed, and the factors themselves.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfigEcho {
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
    pub theta_v: f64,
    pub theta_a: f64,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub epsilon_floor: f64,
    pub enable_soft_boundary: bool,
    pub half_boundary_cap: bool,
    pub freeze_weights: bool,
    pub label_mode: String,
    pub seed: u64,
}

impl ConfigEcho {
    pub fn from_config(config: &AnimcConfig) -> Self {
        Self {
            alpha: config.hp.alpha,
            beta: config.hp.beta,
            r: config.hp.r,
            theta_v: config.hp.theta_v,
            theta_a: config.hp.theta_a,
            max_iter: config.hp.max_iter,
            rel_tol: config.hp.rel_tol,
            epsilon_floor: config.hp.epsilon_floor,
            enable_soft_boundary: config.enable_soft_boundary,
            half_boundary_cap: config.half_boundary_cap,
            freeze_weights: config.freeze_weights,
            label_mode: match config.label_mode {
                LabelMode::Kmeans => "kmeans".into(),
                LabelMode::Argmax => "argmax".into(),
            },
            seed: config.seed,
        }
    }

    pub fn label_mode(&self) -> Result<LabelMode> {
        match self.label_mode.as_str() {
            "kmeans" => Ok(LabelMode::Kmeans),
            "argmax" => Ok(LabelMode::Argmax),
            other => Err(AnimcError::Format(format!("unknown label mode {other:?}"))),
        }
    }

    pub fn to_config(&self) -> Result<AnimcConfig> {
        Ok(AnimcConfig {
            hp: Hyperparams {
                alpha: self.alpha,
                beta: self.beta,
                r: self.r,
                theta_v: self.theta_v,
                theta_a: self.theta_a,
                max_iter: self.max_iter,
                rel_tol: self.rel_tol,
                epsilon_floor: self.epsilon_floor,
            },
            enable_soft_boundary: self.enable_soft_boundary,
            half_boundary_cap: self.half_boundary_cap,
            freeze_weights: self.freeze_weights,
            initial_weight: None,
            label_mode: self.label_mode()?,
            seed: self.seed,
        })
    }
}

/// A fitted model as stored on disk.
#[derive(Debug, Clone)]
pub struct SavedState {
    pub algo: String,
    pub dataset_name: String,
    pub config: ConfigEcho,
    pub n: usize,
    pub c: usize,
    pub iterations_run: usize,
    pub w: Vec<f64>,
    pub u: Vec<Array2<f64>>,
    pub a: Option<Vec<Array2<f64>>>,
    pub v: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct StateFileModel {
    algo: String,
    dataset_name: String,
    config: ConfigEcho,
    n: usize,
    c: usize,
    iterations_run: usize,
    w: Vec<f64>,
    u: Vec<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<Vec<Vec<Vec<f64>>>>,
    v: Vec<Vec<f64>>,
}

/// Serialize a fitted state to canonical JSON.
pub fn state_to_json(state: &SavedState) -> Result<String> {
    for (i, u) in state.u.iter().enumerate() {
        check_finite(u, &format!("basis {i}"))?;
    }
    if let Some(a) = &state.a {
        for (i, m) in a.iter().enumerate() {
            check_finite(m, &format!("regression factor {i}"))?;
        }
    }
    check_finite(&state.v, "latent matrix")?;
    if state.w.iter().any(|v| !v.is_finite()) {
        return Err(AnimcError::Numeric("weights contain a nonfinite value".into()));
    }
    let model = StateFileModel {
        algo: state.algo.clone(),
        dataset_name: state.dataset_name.clone(),
        config: state.config.clone(),
        n: state.n,
        c: state.c,
        iterations_run: state.iterations_run,
        w: state.w.clone(),
        u: state.u.iter().map(matrix_rows).collect(),
        a: state.a.as_ref().map(|a| a.iter().map(matrix_rows).collect()),
        v: matrix_rows(&state.v),
    };
    to_canonical_json(&model)
}

/// Parse a fitted state from JSON.
pub fn state_from_json(text: &str) -> Result<SavedState> {
    let model: StateFileModel =
        serde_json::from_str(text).map_err(|e| AnimcError::Format(format!("bad state file: {e}")))?;
    let u = model
        .u
        .iter()
        .enumerate()
        .map(|(i, rows)| rows_matrix(rows, &format!("basis {i}")))
        .collect::<Result<Vec<_>>>()?;
    let a = match &model.a {
        Some(mats) => Some(
            mats.iter()
                .enumerate()
                .map(|(i, rows)| rows_matrix(rows, &format!("regression factor {i}")))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let v = rows_matrix(&model.v, "latent matrix")?;
    if v.nrows() != model.n || v.ncols() != model.c {
        return Err(AnimcError::Format(format!(
            "latent matrix is {}x{}, file declares {}x{}",
            v.nrows(),
            v.ncols(),
            model.n,
            model.c
        )));
    }
    if model.w.len() != u.len() {
        return Err(AnimcError::Format(format!(
            "{} weights for {} bases",
            model.w.len(),
            u.len()
        )));
    }
    Ok(SavedState {
        algo: model.algo,
        dataset_name: model.dataset_name,
        config: model.config,
        n: model.n,
        c: model.c,
        iterations_run: model.iterations_run,
        w: model.w,
        u,
        a,
        v,
    })
}

pub fn save_state(state: &SavedState, path: &Path) -> Result<()> {
    std::fs::write(path, state_to_json(state)?)?;
    Ok(())
}

pub fn load_state(path: &Path) -> Result<SavedState> {
    state_from_json(&std::fs::read_to_string(path)?)
}

/// Render a convergence trace as CSV: iteration, both objectives, then
/// one weight column per view.
pub fn trace_to_csv(trace: &[IterationRecord]) -> String {
    let m = trace.first().map_or(0, |rec| rec.weights.len());
    let mut out = Vec::new();
    let mut header = String::from("iter,objective,r_objective");
    for v in 1..=m {
        header.push_str(&format!(",w_{v}"));
    }
    writeln!(out, "{header}").unwrap();
    for rec in trace {
        let mut line = format!("{},{},{}", rec.iter, rec.objective, rec.r_objective);
        for w in &rec.weights {
            line.push_str(&format!(",{w}"));
        }
        writeln!(out, "{line}").unwrap();
    }
    String::from_utf8(out).unwrap()
}

pub fn save_trace(trace: &[IterationRecord], path: &Path) -> Result<()> {
    std::fs::write(path, trace_to_csv(trace))?;
    Ok(())
}
