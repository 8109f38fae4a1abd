//! Command-line workflow around the clustering library.
//!
//! Five subcommands cover the full experimental loop: `generate` makes a
//! labeled synthetic multi-view dataset, `perturb` removes instances and
//! adds Gaussian noise, `fit` runs one of the factorization algorithms and
//! writes state/trace files plus a JSON run report, `eval` recomputes
//! metrics for a saved state, and `sweep` runs a seeded grid of corruption
//! levels and algorithms into a results CSV.
//!
//! Exit codes: 0 success, 1 usage (bad flags or parameter values), 2 data
//! (unreadable or inconsistent files), 3 numeric failure.

use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use serde::Serialize;

use animc_core::animc::{fit as animc_fit, predict_labels, AnimcConfig, LabelMode};
use animc_core::baselines::{rmf_fit, semi_nmf_fit, semi_rnmf_fit, FitControls};
use animc_core::data::{Hyperparams, ModelState, MultiViewDataset};
use animc_core::error::AnimcError;
use animc_core::io::{
    load_dataset, load_state, save_dataset, save_state, to_canonical_json, ConfigEcho,
    SavedState,
};
use animc_core::metrics::{evaluate, MetricBundle};
use animc_core::perturb::{synth_generate, NoiseMode, PerturbSpec};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Command failures, split by who is at fault: the invocation or the data.
#[derive(Debug)]
pub enum CliError {
    /// The flags themselves are inconsistent.
    Usage(String),
    /// The library rejected the inputs or the computation failed.
    Core(AnimcError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(err) => write!(f, "{err}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<AnimcError> for CliError {
    fn from(err: AnimcError) -> Self {
        CliError::Core(err)
    }
}

/// Map a failure to the process exit code. Domain errors are bad parameter
/// values, so they count as usage; file and shape problems count as data;
/// solver and overflow problems count as numeric.
pub fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Usage(_) => EXIT_USAGE,
        CliError::Core(core) => match core {
            AnimcError::Domain(_) => EXIT_USAGE,
            AnimcError::Validation(_)
            | AnimcError::Dimension(_)
            | AnimcError::Io(_)
            | AnimcError::Format(_) => EXIT_DATA,
            AnimcError::Solver(_) | AnimcError::Numeric(_) => EXIT_NUMERIC,
        },
    }
}

#[derive(Debug, Parser)]
#[command(name = "animc", version, about = "Auto-weighted multi-view clustering workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic multi-view dataset.
    Generate(GenerateArgs),
    /// Remove instances per view and add Gaussian noise.
    Perturb(PerturbArgs),
    /// Fit a model, writing state, trace, and a JSON run report.
    Fit(FitArgs),
    /// Recompute metrics for a saved state against a labeled dataset.
    Eval(EvalArgs),
    /// Run a grid of missing rates and algorithms into a results CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoKind {
    /// Auto-weighted factorization for noisy and incomplete views.
    Animc,
    /// Ridge-regularized alternating least squares, single view.
    Rmf,
    /// Multiplicative factorization with a nonnegative latent, single view.
    SemiNmf,
    /// Ridge-regularized variant of semi-nmf, single view.
    SemiRnmf,
    /// The animc path with every view weight pinned to one.
    Naive,
}

impl AlgoKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgoKind::Animc => "animc",
            AlgoKind::Rmf => "rmf",
            AlgoKind::SemiNmf => "semi-nmf",
            AlgoKind::SemiRnmf => "semi-rnmf",
            AlgoKind::Naive => "naive",
        }
    }

    fn multi_view(self) -> bool {
        matches!(self, AlgoKind::Animc | AlgoKind::Naive)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelModeArg {
    Kmeans,
    Argmax,
}

impl From<LabelModeArg> for LabelMode {
    fn from(mode: LabelModeArg) -> Self {
        match mode {
            LabelModeArg::Kmeans => LabelMode::Kmeans,
            LabelModeArg::Argmax => LabelMode::Argmax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseModeArg {
    /// Noise individual present entries.
    Entries,
    /// Noise whole present instances.
    Instances,
}

impl From<NoiseModeArg> for NoiseMode {
    fn from(mode: NoiseModeArg) -> Self {
        match mode {
            NoiseModeArg::Entries => NoiseMode::Entries,
            NoiseModeArg::Instances => NoiseMode::Instances,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of instances.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Number of views.
    #[arg(long, default_value_t = 2)]
    pub views: usize,
    /// Number of clusters.
    #[arg(long, default_value_t = 4)]
    pub clusters: usize,
    /// Per-view feature dimensions, comma separated; one entry per view.
    #[arg(long, value_delimiter = ',', default_value = "10,20")]
    pub dims: Vec<usize>,
    /// Distance between cluster centers in the shared latent space.
    #[arg(long, default_value_t = 5.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output dataset file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    /// Input dataset file.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output dataset file.
    #[arg(long)]
    pub out: PathBuf,
    /// Fraction of instances removed from each view, in [0, 0.9].
    #[arg(long, default_value_t = 0.0)]
    pub per: f64,
    /// Fraction of present entries (or instances) that receive noise.
    #[arg(long = "noise-rate", default_value_t = 0.0)]
    pub noise_rate: f64,
    /// Variance of the additive Gaussian noise.
    #[arg(long = "noise-variance", default_value_t = 0.0)]
    pub noise_variance: f64,
    /// Whether noise hits individual entries or whole instances.
    #[arg(long = "noise-mode", value_enum, default_value_t = NoiseModeArg::Entries)]
    pub noise_mode: NoiseModeArg,
    /// Rescale each view to unit maximum magnitude before adding noise.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Model hyperparameters shared by `fit` and `sweep`.
#[derive(Debug, Clone, Args)]
pub struct FitParams {
    /// Weight of the ridge/alignment terms.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Weight of the regression-matrix sparsity term.
    #[arg(long, default_value_t = 10.0)]
    pub beta: f64,
    /// Exponent on the per-view residual norm, in (0, 2].
    #[arg(long, default_value_t = 0.2)]
    pub r: f64,
    /// Row-sparsity curvature for the latent matrix.
    #[arg(long = "theta-v", default_value_t = 0.01)]
    pub theta_v: f64,
    /// Row-sparsity curvature for the regression matrices.
    #[arg(long = "theta-a", default_value_t = 100.0)]
    pub theta_a: f64,
    #[arg(long = "max-iter", default_value_t = 40)]
    pub max_iter: usize,
    /// Relative objective change below which the fit stops.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// How cluster labels are read out of the latent matrix.
    #[arg(long = "label-mode", value_enum, default_value_t = LabelModeArg::Kmeans)]
    pub label_mode: LabelModeArg,
    /// Disable the cap that keeps weights bounded under heavy missingness.
    #[arg(long = "no-soft-boundary")]
    pub no_soft_boundary: bool,
    /// Keep view weights at their initial value for the whole run.
    #[arg(long = "freeze-weights")]
    pub freeze_weights: bool,
}

impl FitParams {
    /// Build the solver configuration. The `naive` ablation reuses the same
    /// machinery with all weights pinned to one.
    pub fn to_config(&self, algo: AlgoKind, seed: u64) -> AnimcConfig {
        let hp = Hyperparams {
            alpha: self.alpha,
            beta: self.beta,
            r: self.r,
            theta_v: self.theta_v,
            theta_a: self.theta_a,
            max_iter: self.max_iter,
            rel_tol: self.tol,
            ..Hyperparams::default()
        };
        let naive = algo == AlgoKind::Naive;
        AnimcConfig {
            hp,
            enable_soft_boundary: !self.no_soft_boundary,
            half_boundary_cap: false,
            freeze_weights: self.freeze_weights || naive,
            initial_weight: if naive { Some(1.0) } else { None },
            label_mode: self.label_mode.into(),
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input dataset file.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = AlgoKind::Animc)]
    pub algo: AlgoKind,
    #[command(flatten)]
    pub params: FitParams,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the fitted factors here.
    #[arg(long = "out-state")]
    pub out_state: Option<PathBuf>,
    /// Write the per-iteration trace CSV here.
    #[arg(long = "out-trace")]
    pub out_trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Kmeans,
    Argmax,
    Both,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Saved state file from a previous fit.
    #[arg(long)]
    pub state: PathBuf,
    /// Labeled dataset file the state was fitted on.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Labeling mode; defaults to the mode echoed in the state file.
    #[arg(long, value_enum)]
    pub mode: Option<EvalMode>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Input dataset file (clean, labeled).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Algorithms to run, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "animc")]
    pub algos: Vec<AlgoKind>,
    /// Missing fractions to test, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5")]
    pub pers: Vec<f64>,
    /// Fraction of present entries (or instances) that receive noise.
    #[arg(long = "noise-rate", default_value_t = 0.0)]
    pub noise_rate: f64,
    /// Variance of the additive Gaussian noise.
    #[arg(long = "noise-variance", default_value_t = 0.0)]
    pub noise_variance: f64,
    /// Whether noise hits individual entries or whole instances.
    #[arg(long = "noise-mode", value_enum, default_value_t = NoiseModeArg::Entries)]
    pub noise_mode: NoiseModeArg,
    /// Rescale each view to unit maximum magnitude before adding noise.
    #[arg(long)]
    pub normalize: bool,
    /// Seeded repetitions per grid cell.
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub params: FitParams,
    /// Output results CSV.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse the process arguments and run; returns the exit code.
pub fn run() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => match dispatch(&cli.command) {
            Ok(()) => EXIT_SUCCESS,
            Err(err) => {
                eprintln!("error: {err}");
                exit_code(&err)
            }
        },
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_SUCCESS,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            code
        }
    }
}

pub fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Generate(args) => cmd_generate(args),
        Command::Perturb(args) => cmd_perturb(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

#[derive(Serialize)]
struct GenerateReport {
    name: String,
    n: usize,
    views: usize,
    clusters: usize,
    dims: Vec<usize>,
    separation: f64,
    seed: u64,
    out: String,
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    if args.dims.len() != args.views {
        return Err(CliError::Usage(format!(
            "--dims lists {} entries but --views asks for {}",
            args.dims.len(),
            args.views
        )));
    }
    let ds = synth_generate(args.n, args.views, args.clusters, &args.dims, args.separation, args.seed)?;
    save_dataset(&ds, &args.out)?;
    let report = GenerateReport {
        name: ds.name.clone(),
        n: args.n,
        views: args.views,
        clusters: args.clusters,
        dims: args.dims.clone(),
        separation: args.separation,
        seed: args.seed,
        out: args.out.display().to_string(),
    };
    println!("{}", to_canonical_json(&report)?);
    Ok(())
}

#[derive(Serialize)]
struct PerturbReport {
    name: String,
    per: f64,
    noise_rate: f64,
    noise_variance: f64,
    removed_per_view: Vec<usize>,
    coverage_repairs: usize,
    out: String,
}

pub fn cmd_perturb(args: &PerturbArgs) -> Result<(), CliError> {
    let ds = load_dataset(&args.input)?;
    let spec = PerturbSpec {
        per: args.per,
        noise_rate: args.noise_rate,
        noise_variance: args.noise_variance,
        normalize_first: args.normalize,
        noise_mode: args.noise_mode.into(),
        seed: args.seed,
    };
    let (out_ds, report) = spec.apply(&ds)?;
    save_dataset(&out_ds, &args.out)?;
    let report = PerturbReport {
        name: out_ds.name.clone(),
        per: args.per,
        noise_rate: args.noise_rate,
        noise_variance: args.noise_variance,
        removed_per_view: report.removed_per_view,
        coverage_repairs: report.repairs,
        out: args.out.display().to_string(),
    };
    println!("{}", to_canonical_json(&report)?);
    Ok(())
}

/// What `fit` prints on stdout: everything needed to reproduce the run plus
/// the headline results. Wall time is floored to whole seconds and is the
/// only field allowed to differ between identical reruns.
#[derive(Serialize)]
pub struct RunReport {
    pub algo: String,
    pub dataset: String,
    pub n: usize,
    pub c: usize,
    pub config: ConfigEcho,
    pub iterations_run: usize,
    pub weights: Vec<f64>,
    pub objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricBundle>,
    pub wall_time_seconds: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<String>,
}

/// Uniform view of a completed fit regardless of algorithm family.
struct FitOutcome {
    w: Vec<f64>,
    u: Vec<Array2<f64>>,
    a: Option<Vec<Array2<f64>>>,
    v: Array2<f64>,
    iterations_run: usize,
    objective: f64,
    trace_csv: String,
}

fn require_single_view(ds: &MultiViewDataset, algo: AlgoKind) -> Result<(), CliError> {
    if ds.m() != 1 {
        return Err(CliError::Core(AnimcError::Validation(format!(
            "algorithm '{}' handles exactly one view but the dataset has {}",
            algo.name(),
            ds.m()
        ))));
    }
    Ok(())
}

/// Trace CSV for the single-view baselines. They share the fit trace layout
/// but define no residual-power surrogate, so that column is left empty,
/// and their single view carries unit weight.
fn baseline_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iter,objective,r_objective,w_1\n");
    for (i, value) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{value},,1\n"));
    }
    out
}

fn run_fit(
    ds: &MultiViewDataset,
    algo: AlgoKind,
    params: &FitParams,
    seed: u64,
) -> Result<FitOutcome, CliError> {
    if algo.multi_view() {
        let config = params.to_config(algo, seed);
        let out = animc_fit(ds, &config)?;
        let objective = out.trace.last().map(|rec| rec.objective).unwrap_or(f64::NAN);
        let trace_csv = animc_core::io::trace_to_csv(&out.trace);
        return Ok(FitOutcome {
            w: out.state.w.clone(),
            u: out.state.u,
            a: Some(out.state.a),
            v: out.state.v,
            iterations_run: out.iterations_run,
            objective,
            trace_csv,
        });
    }
    require_single_view(ds, algo)?;
    let x = &ds.views[0].0.data;
    let ctrl = FitControls { max_iter: params.max_iter, rel_tol: params.tol, seed };
    let result = match algo {
        AlgoKind::Rmf => rmf_fit(x, ds.c, params.alpha, &ctrl)?,
        AlgoKind::SemiNmf => semi_nmf_fit(x, ds.c, &ctrl)?,
        AlgoKind::SemiRnmf => semi_rnmf_fit(x, ds.c, params.alpha, &ctrl)?,
        AlgoKind::Animc | AlgoKind::Naive => unreachable!("multi-view algorithms handled above"),
    };
    let objective = result.objective_trace.last().copied().unwrap_or(f64::NAN);
    Ok(FitOutcome {
        w: vec![1.0],
        u: result.basis,
        a: None,
        v: result.latent,
        iterations_run: result.iterations_run,
        objective,
        trace_csv: baseline_trace_csv(&result.objective_trace),
    })
}

fn labels_from_latent(
    outcome: &FitOutcome,
    c: usize,
    mode: LabelModeArg,
    seed: u64,
) -> Result<Vec<usize>, CliError> {
    let state = ModelState {
        u: Vec::new(),
        a: Vec::new(),
        v: outcome.v.clone(),
        w: Vec::new(),
    };
    Ok(predict_labels(&state, c, mode.into(), seed)?)
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let ds = load_dataset(&args.input)?;
    let started = Instant::now();
    let outcome = run_fit(&ds, args.algo, &args.params, args.seed)?;
    let wall_time_seconds = started.elapsed().as_secs();

    let metrics = match &ds.labels {
        Some(labels) => {
            let pred = labels_from_latent(&outcome, ds.c, args.params.label_mode, args.seed)?;
            Some(evaluate(&pred, labels)?)
        }
        None => None,
    };

    let config = ConfigEcho::from_config(&args.params.to_config(args.algo, args.seed));
    if let Some(path) = &args.out_state {
        let state = SavedState {
            algo: args.algo.name().to_string(),
            dataset_name: ds.name.clone(),
            config: config.clone(),
            n: ds.n(),
            c: ds.c,
            iterations_run: outcome.iterations_run,
            w: outcome.w.clone(),
            u: outcome.u.clone(),
            a: outcome.a.clone(),
            v: outcome.v.clone(),
        };
        save_state(&state, path)?;
    }
    if let Some(path) = &args.out_trace {
        std::fs::write(path, &outcome.trace_csv).map_err(AnimcError::from)?;
    }

    let report = RunReport {
        algo: args.algo.name().to_string(),
        dataset: ds.name.clone(),
        n: ds.n(),
        c: ds.c,
        config,
        iterations_run: outcome.iterations_run,
        weights: outcome.w.clone(),
        objective: outcome.objective,
        metrics,
        wall_time_seconds,
        state_path: args.out_state.as_ref().map(|p| p.display().to_string()),
        trace_path: args.out_trace.as_ref().map(|p| p.display().to_string()),
    };
    println!("{}", to_canonical_json(&report)?);
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    algo: String,
    dataset: String,
    n: usize,
    c: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    kmeans: Option<MetricBundle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    argmax: Option<MetricBundle>,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let saved = load_state(&args.state)?;
    let ds = load_dataset(&args.dataset)?;
    let labels = ds.labels.clone().ok_or_else(|| {
        AnimcError::Validation("dataset carries no labels to evaluate against".into())
    })?;
    if ds.n() != saved.n || ds.c != saved.c {
        return Err(CliError::Core(AnimcError::Dimension(format!(
            "state was fitted on n={} c={} but the dataset has n={} c={}",
            saved.n,
            saved.c,
            ds.n(),
            ds.c
        ))));
    }
    let mode = match args.mode {
        Some(mode) => mode,
        None => match saved.config.label_mode()? {
            LabelMode::Kmeans => EvalMode::Kmeans,
            LabelMode::Argmax => EvalMode::Argmax,
        },
    };
    let state = ModelState {
        u: saved.u,
        a: saved.a.unwrap_or_default(),
        v: saved.v,
        w: saved.w,
    };
    let mut kmeans_metrics = None;
    let mut argmax_metrics = None;
    if matches!(mode, EvalMode::Kmeans | EvalMode::Both) {
        let pred = predict_labels(&state, saved.c, LabelMode::Kmeans, saved.config.seed)?;
        kmeans_metrics = Some(evaluate(&pred, &labels)?);
    }
    if matches!(mode, EvalMode::Argmax | EvalMode::Both) {
        let pred = predict_labels(&state, saved.c, LabelMode::Argmax, saved.config.seed)?;
        argmax_metrics = Some(evaluate(&pred, &labels)?);
    }
    let report = EvalReport {
        algo: saved.algo,
        dataset: ds.name.clone(),
        n: saved.n,
        c: saved.c,
        kmeans: kmeans_metrics,
        argmax: argmax_metrics,
    };
    println!("{}", to_canonical_json(&report)?);
    Ok(())
}

/// One finished sweep row. Failed rows carry NaN metrics so the sweep can
/// keep going without hiding the failure.
#[derive(Debug, Clone)]
struct SweepRow {
    algo: &'static str,
    per: f64,
    noise_rate: f64,
    repeat: usize,
    seed: u64,
    acc: f64,
    nmi: f64,
    purity: f64,
    iters: usize,
    seconds: u64,
}

/// Stateless seed derivation so any row can be reproduced in isolation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_row_seed(base: u64, algo_idx: usize, per_idx: usize, repeat: usize) -> u64 {
    let mut s = splitmix64(base);
    s = splitmix64(s ^ algo_idx as u64);
    s = splitmix64(s ^ per_idx as u64);
    splitmix64(s ^ repeat as u64)
}

fn sweep_row_result(
    ds: &MultiViewDataset,
    labels: &[usize],
    algo: AlgoKind,
    per: f64,
    args: &SweepArgs,
    row_seed: u64,
) -> Result<(MetricBundle, usize), CliError> {
    let spec = PerturbSpec {
        per,
        noise_rate: args.noise_rate,
        noise_variance: args.noise_variance,
        normalize_first: args.normalize,
        noise_mode: args.noise_mode.into(),
        seed: row_seed,
    };
    let (corrupted, _) = spec.apply(ds)?;
    let outcome = run_fit(&corrupted, algo, &args.params, row_seed)?;
    let pred = labels_from_latent(&outcome, corrupted.c, args.params.label_mode, row_seed)?;
    Ok((evaluate(&pred, labels)?, outcome.iterations_run))
}

fn push_display(line: &mut String, value: f64) {
    line.push(',');
    line.push_str(&value.to_string());
}

/// Sample mean and standard deviation; NaN rows poison the summary on
/// purpose so a failed cell cannot masquerade as a good average.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn render_sweep_csv(rows: &[SweepRow], algos: &[AlgoKind], pers: &[f64]) -> String {
    let mut csv = String::from("algo,per,noise_rate,repeat,seed,acc,nmi,purity,iters,seconds\n");
    for row in rows {
        let mut line = format!("{},{},{},{},{}", row.algo, row.per, row.noise_rate, row.repeat, row.seed);
        push_display(&mut line, row.acc);
        push_display(&mut line, row.nmi);
        push_display(&mut line, row.purity);
        line.push_str(&format!(",{},{}", row.iters, row.seconds));
        line.push('\n');
        csv.push_str(&line);
    }
    for algo in algos {
        for per in pers {
            let group: Vec<&SweepRow> = rows
                .iter()
                .filter(|row| row.algo == algo.name() && row.per == *per)
                .collect();
            if group.is_empty() {
                continue;
            }
            let columns: [(&str, Box<dyn Fn(&SweepRow) -> f64>); 5] = [
                ("acc", Box::new(|r: &SweepRow| r.acc)),
                ("nmi", Box::new(|r: &SweepRow| r.nmi)),
                ("purity", Box::new(|r: &SweepRow| r.purity)),
                ("iters", Box::new(|r: &SweepRow| r.iters as f64)),
                ("seconds", Box::new(|r: &SweepRow| r.seconds as f64)),
            ];
            let stats: Vec<(f64, f64)> = columns
                .iter()
                .map(|(_, get)| mean_std(&group.iter().map(|r| get(r)).collect::<Vec<f64>>()))
                .collect();
            for (stat_idx, stat_name) in ["mean", "std"].iter().enumerate() {
                let mut line = format!("{},{},{},{},", algo.name(), per, group[0].noise_rate, stat_name);
                for (mean, std) in &stats {
                    let value = if stat_idx == 0 { *mean } else { *std };
                    push_display(&mut line, value);
                }
                line.push('\n');
                csv.push_str(&line);
            }
        }
    }
    csv
}

#[derive(Serialize)]
struct SweepReport {
    dataset: String,
    algos: Vec<String>,
    pers: Vec<f64>,
    repeats: usize,
    rows: usize,
    failures: usize,
    out: String,
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    if args.algos.is_empty() {
        return Err(CliError::Usage("--algos must list at least one algorithm".into()));
    }
    if args.pers.is_empty() {
        return Err(CliError::Usage("--pers must list at least one missing rate".into()));
    }
    if args.repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let ds = load_dataset(&args.input)?;
    let labels = ds.labels.clone().ok_or_else(|| {
        AnimcError::Validation("sweep needs labels in the dataset to score fits".into())
    })?;

    let mut rows = Vec::new();
    let mut failures = 0usize;
    for (algo_idx, algo) in args.algos.iter().enumerate() {
        for (per_idx, per) in args.pers.iter().enumerate() {
            for repeat in 0..args.repeats {
                let row_seed = derive_row_seed(args.seed, algo_idx, per_idx, repeat);
                let started = Instant::now();
                let (bundle, iters) =
                    match sweep_row_result(&ds, &labels, *algo, *per, args, row_seed) {
                        Ok(outcome) => outcome,
                        Err(err) => {
                            eprintln!(
                                "sweep row failed (algo={}, per={}, repeat={}): {err}",
                                algo.name(),
                                per,
                                repeat
                            );
                            failures += 1;
                            (MetricBundle { acc: f64::NAN, nmi: f64::NAN, purity: f64::NAN }, 0)
                        }
                    };
                rows.push(SweepRow {
                    algo: algo.name(),
                    per: *per,
                    noise_rate: args.noise_rate,
                    repeat,
                    seed: row_seed,
                    acc: bundle.acc,
                    nmi: bundle.nmi,
                    purity: bundle.purity,
                    iters,
                    seconds: started.elapsed().as_secs(),
                });
            }
        }
    }

    let csv = render_sweep_csv(&rows, &args.algos, &args.pers);
    std::fs::write(&args.out, csv).map_err(AnimcError::from)?;
    let report = SweepReport {
        dataset: ds.name.clone(),
        algos: args.algos.iter().map(|a| a.name().to_string()).collect(),
        pers: args.pers.clone(),
        repeats: args.repeats,
        rows: rows.len(),
        failures,
        out: args.out.display().to_string(),
    };
    println!("{}", to_canonical_json(&report)?);
    Ok(())
}
