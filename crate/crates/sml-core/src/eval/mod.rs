//! Measurement surface: confusion matrices, OA/AA/kappa, classification
//! maps, multi-run statistics, and the training-set-size sweep.

pub mod classify;
pub mod map;
pub mod runs;

pub use classify::{classify_cube, predict_coords};
pub use map::{default_palette, parse_map, render_map, write_map};
pub use runs::{
    hard_benchmark, multi_run, run_once, sample_size_sweep, ExperimentConfig, MultiRunReport,
    RunOutcome, RunReport, SweepRow, SweepTable,
};

use crate::error::{Error, Result};
use crate::sml::FeatureBatch;

/// Square count matrix, rows = true class, cols = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_pairs(truth: &[usize], predicted: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::InvalidInput(format!(
                "{} truths vs {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(Error::InvalidInput(format!(
                    "class pair ({t}, {p}) out of range for {classes} classes"
                )));
            }
            cm.record(t, p);
        }
        Ok(cm)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.classes).map(|p| self.count(truth, p)).sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.classes).map(|t| self.count(t, predicted)).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|k| self.count(k, k)).sum()
    }
}

/// OA/AA/kappa plus per-class accuracies. Classes with no true samples are
/// excluded from AA and flagged in `excluded`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    /// Per-class accuracy; `None` when the class has zero row sum.
    pub per_class: Vec<Option<f64>>,
    pub excluded: Vec<usize>,
}

/// Overall accuracy, average per-class accuracy, and Cohen's kappa.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidInput("empty confusion matrix".into()));
    }
    let total_f = total as f64;
    let oa = cm.trace() as f64 / total_f;

    let mut per_class = Vec::with_capacity(cm.classes());
    let mut excluded = Vec::new();
    let mut aa_sum = 0.0;
    let mut aa_count = 0usize;
    for k in 0..cm.classes() {
        let row = cm.row_sum(k);
        if row == 0 {
            per_class.push(None);
            excluded.push(k);
        } else {
            let acc = cm.count(k, k) as f64 / row as f64;
            per_class.push(Some(acc));
            aa_sum += acc;
            aa_count += 1;
        }
    }
    if aa_count == 0 {
        return Err(Error::InvalidInput("no class has any true sample".into()));
    }
    let aa = aa_sum / aa_count as f64;

    let mut p_e = 0.0;
    for k in 0..cm.classes() {
        p_e += cm.row_sum(k) as f64 * cm.col_sum(k) as f64 / (total_f * total_f);
    }
    let denom = 1.0 - p_e;
    let kappa = if denom == 0.0 {
        // degenerate chance agreement: a single occupied row/col pair
        if oa == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (oa - p_e) / denom
    };

    Ok(MetricsReport {
        oa,
        aa,
        kappa,
        per_class,
        excluded,
    })
}

/// Between-class scatter over within-class scatter of an embedding batch;
/// the scalar separability measure used by the acceptance experiments.
pub fn fisher_ratio(batch: &FeatureBatch) -> f64 {
    let stats = crate::sml::class_stats(batch);
    let n = batch.len() as f64;
    let d = batch.dim();
    let mut grand = vec![0.0; d];
    for (k, mean) in stats.means.iter().enumerate() {
        let weight = stats.counts[k] as f64 / n;
        for (g, &m) in grand.iter_mut().zip(mean) {
            *g += weight * m;
        }
    }
    let mut between = 0.0;
    for (k, mean) in stats.means.iter().enumerate() {
        let weight = stats.counts[k] as f64 / n;
        let dist: f64 = mean
            .iter()
            .zip(&grand)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        between += weight * dist;
    }
    let mut within = 0.0;
    for (k, &var) in stats.variances.iter().enumerate() {
        within += stats.counts[k] as f64 / n * var;
    }
    if within == 0.0 {
        f64::INFINITY
    } else {
        between / within
    }
}
