//! Synthetic data generation and controlled corruption: a clustered
//! multi-view generator, instance-level missingness, and additive Gaussian
//! noise. Everything is driven by one seeded generator per call, so equal
//! arguments produce bitwise-equal outputs.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{validate_dataset, MultiViewDataset, PresenceMask, ViewMatrix};
use crate::error::{AnimcError, Result};

/// Corruption plan: a missing fraction, a noise budget, and a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbSpec {
    /// Fraction of instances removed from each view, in `[0, 0.9]`.
    pub per: f64,
    /// Fraction of present entries (or instances) that receive noise.
    pub noise_rate: f64,
    /// Variance of the additive Gaussian noise.
    pub noise_variance: f64,
    /// Rescale each view to unit maximum magnitude before adding noise.
    pub normalize_first: bool,
    /// Whether noise hits individual entries or whole instances.
    pub noise_mode: NoiseMode,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    Entries,
    Instances,
}

impl Default for PerturbSpec {
    fn default() -> Self {
        Self {
            per: 0.0,
            noise_rate: 0.0,
            noise_variance: 0.0,
            normalize_first: false,
            noise_mode: NoiseMode::Entries,
            seed: 0,
        }
    }
}

impl PerturbSpec {
    /// Apply missingness, then noise, with sub-seeds derived from the spec
    /// seed so the two stages stay independent.
    pub fn apply(&self, ds: &MultiViewDataset) -> Result<(MultiViewDataset, MissingReport)> {
        let mut master = ChaCha8Rng::seed_from_u64(self.seed);
        let missing_seed = master.next_u64();
        let noise_seed = master.next_u64();
        let (dropped, report) = apply_missing_report(ds, self.per, missing_seed)?;
        let noisy = add_gaussian_noise_mode(
            &dropped,
            self.noise_rate,
            self.noise_variance,
            self.normalize_first,
            self.noise_mode,
            noise_seed,
        )?;
        Ok((noisy, report))
    }
}

/// What the missingness pass actually did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingReport {
    /// Instances removed from each view as requested.
    pub removed_per_view: Vec<usize>,
    /// Instances restored in one view because they had become absent
    /// everywhere.
    pub repairs: usize,
}

/// Generate a clustered multi-view dataset.
///
/// Labels are balanced and shuffled. A shared nonnegative latent matrix
/// places each instance near its cluster axis with `separation` controlling
/// how far apart clusters sit. Every view observes the latent through its
/// own orthonormal linear map plus Gaussian observation noise; the first
/// view is nearly clean and later views get progressively noisier, which
/// gives weighting methods something real to distinguish.
pub fn synth_generate(
    n: usize,
    m: usize,
    c: usize,
    dims: &[usize],
    separation: f64,
    seed: u64,
) -> Result<MultiViewDataset> {
    if m == 0 {
        return Err(AnimcError::Validation("at least one view is required".into()));
    }
    if dims.len() != m {
        return Err(AnimcError::Dimension(format!(
            "got {} view dimensions for {m} views",
            dims.len()
        )));
    }
    if c == 0 {
        return Err(AnimcError::Validation("cluster count must be at least 1".into()));
    }
    if n < c {
        return Err(AnimcError::Validation(format!(
            "need at least {c} instances for {c} clusters, got {n}"
        )));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(AnimcError::Domain(format!(
            "separation must be finite and >= 0, got {separation}"
        )));
    }
    for (v, &d) in dims.iter().enumerate() {
        if d < c {
            return Err(AnimcError::Validation(format!(
                "view {v} has {d} features but the orthonormal map needs at least {c}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    labels.shuffle(&mut rng);

    // Nonnegative latent profiles: cluster offset plus folded Gaussian
    // jitter, so the planted optimum sits inside the feasible region.
    let mut z = Array2::zeros((c, n));
    for i in 0..n {
        for k in 0..c {
            let jitter: f64 = rng.sample::<f64, _>(StandardNormal).abs();
            z[[k, i]] = jitter + if k == labels[i] { separation } else { 0.0 };
        }
    }

    let mut views = Vec::with_capacity(m);
    for (v, &d) in dims.iter().enumerate() {
        let raw = nalgebra::DMatrix::from_fn(d, c, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = raw.qr().q();
        let map = crate::solvers::from_na(&q);
        let sigma = if v == 0 { 0.2 } else { 1.5 * v as f64 };
        let mut x = map.dot(&z);
        for val in x.iter_mut() {
            *val += sigma * rng.sample::<f64, _>(StandardNormal);
        }
        views.push((
            ViewMatrix::new(format!("view-{v}"), x),
            PresenceMask::all_present(n, d),
        ));
    }
    Ok(MultiViewDataset {
        name: format!("synthetic-n{n}-m{m}-c{c}"),
        views,
        labels: Some(labels),
        c,
    })
}

/// Remove `floor(per * n)` instances from each view, independently at
/// random, zeroing the dropped columns and clearing their mask bits.
pub fn apply_missing(ds: &MultiViewDataset, per: f64, seed: u64) -> Result<MultiViewDataset> {
    apply_missing_report(ds, per, seed).map(|(out, _)| out)
}

/// As [`apply_missing`], also reporting removal counts and coverage
/// repairs. An instance that ends up absent from every view is restored in
/// one view chosen at random, so the output always passes validation.
pub fn apply_missing_report(
    ds: &MultiViewDataset,
    per: f64,
    seed: u64,
) -> Result<(MultiViewDataset, MissingReport)> {
    if !(0.0..=0.9).contains(&per) {
        return Err(AnimcError::Domain(format!(
            "missing fraction must lie in [0, 0.9], got {per}"
        )));
    }
    validate_dataset(ds)?;
    let n = ds.n();
    let m = ds.m();
    let k = (per * n as f64).floor() as usize;
    // Full coverage needs at least n present slots across views.
    if m * (n - k) < n {
        return Err(AnimcError::Validation(format!(
            "removing {k} of {n} instances from each of {m} views cannot keep every \
             instance observed somewhere (need per <= {:.4})",
            (m - 1) as f64 / m as f64
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ds.clone();
    for (x, mask) in out.views.iter_mut() {
        let chosen = rand::seq::index::sample(&mut rng, n, k);
        for i in chosen {
            mask.set_absent(i);
            x.data.column_mut(i).fill(0.0);
        }
    }
    // Repair instances that became absent everywhere.
    let mut repairs = 0usize;
    for i in 0..n {
        if out.views.iter().any(|(_, mask)| mask.is_present(i)) {
            continue;
        }
        let v = rng.random_range(0..m);
        out.views[v].1.set_present(i);
        let original = ds.views[v].0.data.column(i).to_owned();
        out.views[v].0.data.column_mut(i).assign(&original);
        repairs += 1;
    }
    validate_dataset(&out)?;
    Ok((
        out,
        MissingReport {
            removed_per_view: vec![k; m],
            repairs,
        },
    ))
}

/// Add zero-mean Gaussian noise to a fraction of the present entries of
/// every view. Absent columns are never touched.
pub fn add_gaussian_noise(
    ds: &MultiViewDataset,
    noise_rate: f64,
    variance: f64,
    normalize_first: bool,
    seed: u64,
) -> Result<MultiViewDataset> {
    add_gaussian_noise_mode(ds, noise_rate, variance, normalize_first, NoiseMode::Entries, seed)
}

/// Noise application with an explicit choice between corrupting scattered
/// entries and corrupting whole instances.
pub fn add_gaussian_noise_mode(
    ds: &MultiViewDataset,
    noise_rate: f64,
    variance: f64,
    normalize_first: bool,
    mode: NoiseMode,
    seed: u64,
) -> Result<MultiViewDataset> {
    if !(0.0..=1.0).contains(&noise_rate) {
        return Err(AnimcError::Domain(format!(
            "noise rate must lie in [0, 1], got {noise_rate}"
        )));
    }
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(AnimcError::Domain(format!(
            "noise variance must be finite and >= 0, got {variance}"
        )));
    }
    validate_dataset(ds)?;
    let mut out = ds.clone();
    if normalize_first {
        for (x, _) in out.views.iter_mut() {
            let max_abs = x.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if max_abs > 0.0 {
                x.data.mapv_inplace(|v| v / max_abs);
            }
        }
    }
    if noise_rate == 0.0 || variance == 0.0 {
        return Ok(out);
    }
    let sigma = variance.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (x, mask) in out.views.iter_mut() {
        let present: Vec<usize> = (0..x.n()).filter(|&i| mask.is_present(i)).collect();
        if present.is_empty() {
            continue;
        }
        let d = x.d();
        match mode {
            NoiseMode::Entries => {
                let pool = d * present.len();
                let hits = (noise_rate * pool as f64).round() as usize;
                if hits == 0 {
                    continue;
                }
                let chosen = rand::seq::index::sample(&mut rng, pool, hits.min(pool));
                for flat in chosen {
                    let col = present[flat / d];
                    let row = flat % d;
                    x.data[[row, col]] += sigma * rng.sample::<f64, _>(StandardNormal);
                }
            }
            NoiseMode::Instances => {
                let hits = (noise_rate * present.len() as f64).round() as usize;
                if hits == 0 {
                    continue;
                }
                let chosen =
                    rand::seq::index::sample(&mut rng, present.len(), hits.min(present.len()));
                for idx in chosen {
                    let col = present[idx];
                    for row in 0..d {
                        x.data[[row, col]] += sigma * rng.sample::<f64, _>(StandardNormal);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Column means of the latent profiles per cluster, exposed for tests that
/// need the planted structure.
pub fn cluster_sizes(labels: &[usize], c: usize) -> Array1<f64> {
    let mut sizes = Array1::zeros(c);
    for &l in labels {
        sizes[l] += 1.0;
    }
    sizes
}
