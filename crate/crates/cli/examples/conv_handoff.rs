use animc_core::animc::{fit, AnimcConfig};
use animc_core::data::Hyperparams;
use animc_core::perturb::{synth_generate, PerturbSpec};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn main() {
    let seed = 1u64;
    let per = 0.4;
    let ds = synth_generate(200, 2, 4, &[10, 20], 5.0, seed).unwrap();
    let spec = PerturbSpec { per, seed, ..PerturbSpec::default() };
    let (cds, _) = spec.apply(&ds).unwrap();

    // Replicate the fit's initial draws for the python side.
    let n = cds.n();
    let c = 4usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v0 = Array2::<f64>::from_shape_fn((n, c), |_| rng.random_range(0.1..1.0));
    let a0s: Vec<Array2<f64>> = cds
        .views
        .iter()
        .map(|(x, _)| Array2::from_shape_fn((x.d(), c), |_| rng.random_range(0.0..0.01)))
        .collect();

    let config = AnimcConfig {
        hp: Hyperparams { rel_tol: 1e-300, max_iter: 60, ..Hyperparams::default() },
        seed,
        ..AnimcConfig::default()
    };
    let out = fit(&cds, &config).unwrap();

    let dump = serde_json::json!({
        "x": cds.views.iter().map(|(x, _)| rows(&x.data)).collect::<Vec<_>>(),
        "g": cds.views.iter().map(|(_, m)| m.g().to_vec()).collect::<Vec<_>>(),
        "v0": rows(&v0),
        "a0": a0s.iter().map(rows).collect::<Vec<_>>(),
        "trace": out.trace.iter().map(|t| t.objective).collect::<Vec<_>>(),
    });
    std::fs::write("/tmp/handoff.json", serde_json::to_string(&dump).unwrap()).unwrap();
    println!("rust iterations={} final objective={}", out.iterations_run, out.trace.last().unwrap().objective);
}
