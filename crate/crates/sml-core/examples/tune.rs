//! Scratch harness for calibrating the hard benchmark constants.
//!
//! env overrides: SEEDS, SIZES, ITERS, LR, MU, SEP, NOISE, BATCH, ALPHA

use std::time::Instant;

use sml_core::data::generate_synthetic;
use sml_core::eval::{hard_benchmark, run_once};
use sml_core::network::train::LossMode;
use sml_core::numerics::Rng;

fn env<T: std::str::FromStr>(name: &str, default: T) -> T {
    std::env::var(name)
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(default)
}

fn main() {
    let n_seeds: u64 = env("SEEDS", 3);
    let sizes: Vec<usize> = std::env::var("SIZES")
        .unwrap_or_else(|_| "200".into())
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();

    let (_, mut base) = hard_benchmark();
    base.sgd.iterations = env("ITERS", base.sgd.iterations);
    base.sgd.learning_rate = env("LR", base.sgd.learning_rate);
    base.sgd.batch_size = env("BATCH", base.sgd.batch_size);
    base.weights.mu = env("MU", base.weights.mu);
    base.weights.alpha = env("ALPHA", base.weights.alpha);
    base.weights.beta = env("BETA", base.weights.beta);
    base.weights.lambda = env("LAMBDA", base.weights.lambda);
    let c1: usize = env("C1", 0);
    if c1 > 0 {
        use sml_core::network::LayerSpec;
        let c2: usize = env("C2", c1 * 2);
        let d: usize = env("D", c2);
        base.arch = vec![
            LayerSpec::Conv2d { out_channels: c1, kernel_h: 3, kernel_w: 3 },
            LayerSpec::Relu,
            LayerSpec::Conv2d { out_channels: c2, kernel_h: 3, kernel_w: 3 },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense { out_features: d },
        ];
    }
    let sep: f64 = env("SEP", 1.6);
    let noise: f64 = env("NOISE", 0.6);
    let cube = generate_synthetic(&mut Rng::new(0x5EED_C0DE), 64, 64, 12, 5, 3, sep, noise)
        .unwrap();

    let mut counts = vec![0usize; cube.num_classes()];
    for &l in &cube.labels {
        if l > 0 {
            counts[l as usize - 1] += 1;
        }
    }
    println!(
        "counts {counts:?} | iters {} lr {} mu {} sep {sep} noise {noise} batch {}",
        base.sgd.iterations, base.sgd.learning_rate, base.weights.mu, base.sgd.batch_size
    );

    for &size in &sizes {
        let mut soft_oas = Vec::new();
        let mut sml_oas = Vec::new();
        let mut fisher_wins = 0;
        for seed in 1..=n_seeds {
            let t0 = Instant::now();
            let mut cfg = base.clone();
            cfg.per_class_train = size;
            cfg.mode = LossMode::Softmax;
            let soft = run_once(&cube, &cfg, seed).unwrap();
            cfg.mode = LossMode::SoftmaxSml;
            let sml = run_once(&cube, &cfg, seed).unwrap();
            if sml.report.test_fisher > soft.report.test_fisher {
                fisher_wins += 1;
            }
            let train_oa = |out: &sml_core::eval::RunOutcome| {
                let preds = sml_core::eval::predict_coords(
                    &out.net,
                    &cube,
                    &out.train_coords,
                    base.patch_size,
                )
                .unwrap();
                let correct = out
                    .train_coords
                    .iter()
                    .zip(&preds)
                    .filter(|&(&(r, c), &p)| cube.label_at(r, c) == p)
                    .count();
                correct as f64 / preds.len() as f64
            };
            println!(
                "size {size} seed {seed}: soft {:.4}/tr {:.3} (f {:.3}) | sml {:.4}/tr {:.3} (f {:.3}) | gap {:+.4} | {:.1}s",
                soft.report.oa,
                train_oa(&soft),
                soft.report.test_fisher,
                sml.report.oa,
                train_oa(&sml),
                sml.report.test_fisher,
                sml.report.oa - soft.report.oa,
                t0.elapsed().as_secs_f64()
            );
            soft_oas.push(soft.report.oa);
            sml_oas.push(sml.report.oa);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "== size {size}: soft mean {:.4}, sml mean {:.4}, gap {:+.4}, fisher {fisher_wins}/{n_seeds}",
            mean(&soft_oas),
            mean(&sml_oas),
            mean(&sml_oas) - mean(&soft_oas)
        );
    }
}
