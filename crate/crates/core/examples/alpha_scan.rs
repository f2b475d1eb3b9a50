//! Scratch scan: fitted per-domain alpha versus domain mean age across
//! generator settings.

use gopsa_core::dataio::{generate_synthetic, SynthConfig};
use gopsa_core::gopsa::{train, OptimizerConfig};

fn main() {
    for &c in &[0.2, -0.2, 0.4, -0.4, 0.1] {
        for seed in [1u64, 2, 3] {
            let k = 5;
            let cfg = SynthConfig {
                d: 4,
                n_freqs: 2,
                n_domains: k,
                n_per_domain: 20,
                seed,
                age_ranges: (0..k).map(|i| (20.0 + 12.0 * i as f64, 36.0 + 12.0 * i as f64)).collect(),
                intercept_strength: c,
                signal_strength: 25.0,
                noise_sigma: 0.02,
            };
            let domains = generate_synthetic(&cfg).unwrap();
            let model = train(&domains, 1.0, &OptimizerConfig::default()).unwrap();
            let alphas = model.alphas();
            let ages: Vec<f64> = domains.iter().map(|d| d.mean_age().unwrap()).collect();
            let increasing = alphas.windows(2).all(|w| w[0] < w[1]);
            let decreasing = alphas.windows(2).all(|w| w[0] > w[1]);
            println!(
                "c={c:+.1} seed={seed} ages={:?} alphas={:?} inc={increasing} dec={decreasing}",
                ages.iter().map(|a| (a * 10.0).round() / 10.0).collect::<Vec<_>>(),
                alphas.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>()
            );
        }
    }
}
