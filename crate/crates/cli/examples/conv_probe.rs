use animc_core::animc::{fit, AnimcConfig};
use animc_core::data::Hyperparams;
use animc_core::perturb::{synth_generate, PerturbSpec};

fn main() {
    for &per in &[0.2, 0.4] {
        for seed in 0..10u64 {
            let ds = synth_generate(200, 2, 4, &[10, 20], 5.0, seed).unwrap();
            let spec = PerturbSpec { per, seed, ..PerturbSpec::default() };
            let (corrupted, _) = spec.apply(&ds).unwrap();
            let config = AnimcConfig {
                hp: Hyperparams { rel_tol: 1e-300, max_iter: 60, ..Hyperparams::default() },
                seed,
                ..AnimcConfig::default()
            };
            let out = fit(&corrupted, &config).unwrap();
            // find first iteration where relative delta < 1e-4
            let mut hit = None;
            for k in 1..out.trace.len() {
                let prev = out.trace[k - 1].objective;
                let cur = out.trace[k].objective;
                if (prev - cur).abs() <= 1e-4 * prev.abs().max(1.0) {
                    hit = Some(k);
                    break;
                }
            }
            let deltas: Vec<String> = (35..=45.min(out.trace.len() - 1))
                .map(|k| {
                    let prev = out.trace[k - 1].objective;
                    let cur = out.trace[k].objective;
                    format!("{:.1e}", (prev - cur).abs() / prev.abs().max(1.0))
                })
                .collect();
            println!("per={per} seed={seed}: first_hit={hit:?} rel-deltas@35..45=[{}]", deltas.join(","));
        }
    }
}
