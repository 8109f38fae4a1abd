//! Auto-weighted multi-view clustering on noisy and incomplete data.
//!
//! The crate factors several feature views of the same instances into
//! per-view bases and one shared nonnegative latent representation,
//! learning a weight per view so that noisy or sparsely observed views
//! lose influence automatically. Alongside the main solver it ships the
//! single-view factorization baselines it generalizes, a synthetic data
//! generator with missing-data and noise perturbations, clustering
//! metrics, and file formats for datasets, fitted states, and traces.

pub mod animc;
pub mod baselines;
pub mod data;
pub mod error;
pub mod io;
pub mod metrics;
pub mod norms;
pub mod perturb;
pub mod solvers;

pub use data::{
    build_presence, masked_residual, residual_times_t, validate_dataset, Hyperparams,
    ModelState, MultiViewDataset, PresenceMask, ValidationReport, ViewMatrix,
};
pub use error::{AnimcError, Result};
