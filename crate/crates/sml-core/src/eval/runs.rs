//! Seeded end-to-end runs: train, evaluate, repeat over seeds and
//! training-set sizes.

use crate::data::{extract_patches, stratified_split, HyperspectralCube, SplitSpec};
use crate::error::{Error, Result};
use crate::eval::{fisher_ratio, metrics, predict_coords, ConfusionMatrix};
use crate::network::train::{train, LossMode, TrainHistory};
use crate::network::{forward, init_weights, LayerSpec, NetworkState};
use crate::numerics::{Rng, SgdConfig};
use crate::sml::LossWeights;

/// Everything a single train-and-evaluate run needs besides the cube and
/// the seed.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub patch_size: usize,
    pub arch: Vec<LayerSpec>,
    pub sgd: SgdConfig,
    pub weights: LossWeights,
    pub mode: LossMode,
    pub kappa: f64,
    pub per_class_train: usize,
}

/// Test-set metrics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    pub per_class: Vec<f64>,
    pub sml_skipped: usize,
    /// Between/within scatter ratio of the test embeddings.
    pub test_fisher: f64,
    pub final_ce: f64,
}

/// A finished run with its artifacts still in memory.
pub struct RunOutcome {
    pub net: NetworkState,
    pub history: TrainHistory,
    pub report: RunReport,
    pub train_coords: Vec<(usize, usize)>,
    pub test_coords: Vec<(usize, usize)>,
}

/// Deterministic full run: split, init, train, evaluate on the held-out
/// pixels. The run seed drives the split, the weight init, and the batch
/// draws through one generator.
pub fn run_once(cube: &HyperspectralCube, cfg: &ExperimentConfig, seed: u64) -> Result<RunOutcome> {
    let mut rng = Rng::new(seed);
    let split_seed = rng.next_u64();
    let (train_coords, test_coords) = stratified_split(
        cube,
        &SplitSpec {
            per_class_train: cfg.per_class_train,
            seed: split_seed,
        },
    )?;
    let dataset = extract_patches(cube, &train_coords, cfg.patch_size)?;
    let input = [cfg.patch_size, cfg.patch_size, cube.bands];
    let mut net = init_weights(&cfg.arch, input, cube.num_classes(), &mut rng)?;
    let history = train(
        &mut net,
        &dataset,
        cfg.mode,
        &cfg.sgd,
        &cfg.weights,
        cfg.kappa,
        &mut rng,
    )?;
    let report = evaluate_coords(&net, cube, cfg, &test_coords, seed, &history)?;
    Ok(RunOutcome {
        net,
        history,
        report,
        train_coords,
        test_coords,
    })
}

/// Metrics of a frozen network on the given coordinates.
pub fn evaluate_coords(
    net: &NetworkState,
    cube: &HyperspectralCube,
    cfg: &ExperimentConfig,
    coords: &[(usize, usize)],
    seed: u64,
    history: &TrainHistory,
) -> Result<RunReport> {
    let predictions = predict_coords(net, cube, coords, cfg.patch_size)?;
    let truth: Vec<usize> = coords
        .iter()
        .map(|&(r, c)| cube.label_at(r, c) as usize - 1)
        .collect();
    let predicted: Vec<usize> = predictions.iter().map(|&p| p as usize - 1).collect();
    let cm = ConfusionMatrix::from_pairs(&truth, &predicted, cube.num_classes())?;
    let m = metrics(&cm)?;
    let test_batch = extract_patches(cube, coords, cfg.patch_size)?;
    let (embeddings, _, _) = forward(net, &test_batch)?;
    Ok(RunReport {
        seed,
        oa: m.oa,
        aa: m.aa,
        kappa: m.kappa,
        per_class: m
            .per_class
            .iter()
            .map(|acc| acc.unwrap_or(f64::NAN))
            .collect(),
        sml_skipped: history.sml_skipped,
        test_fisher: fisher_ratio(&embeddings),
        final_ce: history.final_ce(),
    })
}

/// Sample mean and standard deviation (n - 1 denominator; 0 for n < 2).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-metric mean and standard deviation across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiRunReport {
    pub oa: (f64, f64),
    pub aa: (f64, f64),
    pub kappa: (f64, f64),
    pub runs: Vec<RunReport>,
}

pub fn multi_run(
    cube: &HyperspectralCube,
    cfg: &ExperimentConfig,
    seeds: &[u64],
) -> Result<MultiRunReport> {
    if seeds.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "multi-run needs at least 2 seeds, got {}",
            seeds.len()
        )));
    }
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        runs.push(run_once(cube, cfg, seed)?.report);
    }
    let oa: Vec<f64> = runs.iter().map(|r| r.oa).collect();
    let aa: Vec<f64> = runs.iter().map(|r| r.aa).collect();
    let kappa: Vec<f64> = runs.iter().map(|r| r.kappa).collect();
    Ok(MultiRunReport {
        oa: mean_std(&oa),
        aa: mean_std(&aa),
        kappa: mean_std(&kappa),
        runs,
    })
}

/// One row of the size-sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub size: usize,
    pub method: &'static str,
    pub oa_mean: f64,
    pub oa_std: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// (size, reason) for sizes that could not run.
    pub skipped: Vec<(usize, String)>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,method,oa_mean,oa_std\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.size, row.method, row.oa_mean, row.oa_std
            ));
        }
        out
    }
}

/// Default sweep sizes.
pub const SWEEP_SIZES: [usize; 4] = [25, 50, 100, 200];

/// Train softmax-only and softmax+metric at each training-set size over the
/// same seeds, reporting OA mean and std per (size, method).
pub fn sample_size_sweep(
    cube: &HyperspectralCube,
    cfg: &ExperimentConfig,
    sizes: &[usize],
    seeds: &[u64],
) -> Result<SweepTable> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one seed".into()));
    }
    let mut table = SweepTable::default();
    for &size in sizes {
        let mut sized = cfg.clone();
        sized.per_class_train = size;
        // feasibility probe: the split itself reports the failing class
        let probe = stratified_split(
            cube,
            &SplitSpec {
                per_class_train: size,
                seed: 0,
            },
        );
        if let Err(err) = probe {
            table.skipped.push((size, err.to_string()));
            continue;
        }
        let mut softmax_oa = Vec::with_capacity(seeds.len());
        let mut metric_oa = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let mut soft_cfg = sized.clone();
            soft_cfg.mode = LossMode::Softmax;
            softmax_oa.push(run_once(cube, &soft_cfg, seed)?.report.oa);
            let mut metric_cfg = sized.clone();
            metric_cfg.mode = LossMode::SoftmaxSml;
            metric_oa.push(run_once(cube, &metric_cfg, seed)?.report.oa);
        }
        let (mean, std) = mean_std(&softmax_oa);
        table.rows.push(SweepRow {
            size,
            method: "softmax",
            oa_mean: mean,
            oa_std: std,
        });
        let (mean, std) = mean_std(&metric_oa);
        table.rows.push(SweepRow {
            size,
            method: "softmax+sml",
            oa_mean: mean,
            oa_std: std,
        });
    }
    Ok(table)
}

/// The documented "hard" synthetic benchmark: spectral separation low
/// enough that a softmax-only run lands well below ceiling, at desk-scale
/// runtime. Returns the cube and the baseline configuration (mode
/// softmax+sml; callers flip the mode for paired comparisons).
pub fn hard_benchmark() -> (HyperspectralCube, ExperimentConfig) {
    let mut rng = Rng::new(0x5EED_C0DE);
    let cube = crate::data::generate_synthetic(&mut rng, 64, 64, 12, 5, 3, 1.6, 0.6)
        .expect("benchmark cube parameters are valid");
    let cfg = ExperimentConfig {
        patch_size: 5,
        arch: vec![
            LayerSpec::Conv2d {
                out_channels: 16,
                kernel_h: 3,
                kernel_w: 3,
            },
            LayerSpec::Relu,
            LayerSpec::Conv2d {
                out_channels: 32,
                kernel_h: 3,
                kernel_w: 3,
            },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense { out_features: 32 },
        ],
        sgd: SgdConfig {
            learning_rate: 0.01,
            iterations: 600,
            batch_size: 50,
        },
        weights: LossWeights {
            mu: 0.02,
            ..LossWeights::default()
        },
        mode: LossMode::SoftmaxSml,
        kappa: 1.0,
        per_class_train: 200,
    };
    (cube, cfg)
}
