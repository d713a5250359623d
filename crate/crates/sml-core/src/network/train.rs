//! Joint training loop: softmax cross-entropy plus an optional metric term.

use crate::baseline::{contrastive, mine_pairs, mine_triplets, softmax_ce, triplet};
use crate::data::SampleBatch;
use crate::error::{Error, Result};
use crate::network::{backward, forward, NetworkState};
use crate::numerics::{Rng, SgdConfig, Tensor};
use crate::sml::{sml_forward_backward, FeatureBatch, LossWeights};

/// Which auxiliary loss is back-propagated alongside the softmax head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    Softmax,
    SoftmaxSml,
    SoftmaxContrastive,
    SoftmaxTriplet,
}

impl LossMode {
    pub fn name(&self) -> &'static str {
        match self {
            LossMode::Softmax => "softmax",
            LossMode::SoftmaxSml => "softmax+sml",
            LossMode::SoftmaxContrastive => "softmax+contrastive",
            LossMode::SoftmaxTriplet => "softmax+triplet",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "softmax" => Ok(LossMode::Softmax),
            "softmax+sml" => Ok(LossMode::SoftmaxSml),
            "softmax+contrastive" => Ok(LossMode::SoftmaxContrastive),
            "softmax+triplet" => Ok(LossMode::SoftmaxTriplet),
            other => Err(Error::InvalidInput(format!(
                "unknown loss '{other}' (expected softmax, softmax+sml, \
                 softmax+contrastive, or softmax+triplet)"
            ))),
        }
    }
}

/// One optimizer step of the loss history. The metric-term scalars are
/// always reported; only the mode's own term is back-propagated, scaled
/// by `mu`.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub step: usize,
    pub ce: f64,
    pub l_intra: f64,
    pub l_inter: f64,
    pub l_diversity: f64,
    pub l_sml: f64,
    /// The auxiliary loss that was actually trained on (0 for pure softmax).
    pub l_aux: f64,
    /// ce + mu * l_aux
    pub l_total: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub steps: Vec<StepRecord>,
    /// Batches whose metric term was skipped because fewer than two classes
    /// were present.
    pub sml_skipped: usize,
}

impl TrainHistory {
    pub fn final_ce(&self) -> f64 {
        self.steps.last().map(|s| s.ce).unwrap_or(f64::NAN)
    }
}

/// Metric-loss scalars for one batch, or a skip when the batch degenerates
/// to a single class.
fn sml_terms_or_skip(
    features: &FeatureBatch,
    weights: &LossWeights,
    skipped: &mut usize,
) -> (f64, f64, f64, f64, Option<Tensor>) {
    match sml_forward_backward(features, weights) {
        Ok(out) => (
            out.l_intra,
            out.l_inter,
            out.l_diversity,
            out.l_total,
            Some(out.d_features),
        ),
        Err(Error::SingleClass) => {
            *skipped += 1;
            (0.0, 0.0, 0.0, 0.0, None)
        }
        Err(_) => unreachable!("forward pass produces well-formed batches"),
    }
}

/// Index lists per present class, ascending class id.
fn class_rows(labels: &[usize]) -> Vec<(usize, Vec<usize>)> {
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
        .into_iter()
        .map(|c| {
            let rows = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            (c, rows)
        })
        .collect()
}

/// Stratified draw: ceil(batch_size / classes) rows per class (without
/// replacement when the class is large enough, with replacement otherwise),
/// interleaved round-robin and truncated to batch_size. With
/// batch_size >= 2 * classes every class contributes at least two rows.
fn draw_batch(
    by_class: &[(usize, Vec<usize>)],
    batch_size: usize,
    rng: &mut Rng,
) -> Vec<usize> {
    let classes = by_class.len();
    let need = batch_size.div_ceil(classes);
    let mut per_class: Vec<Vec<usize>> = Vec::with_capacity(classes);
    for (_, rows) in by_class {
        let mut chosen = Vec::with_capacity(need);
        if rows.len() >= need {
            let mut scratch = rows.clone();
            for t in 0..need {
                let j = t + rng.below((scratch.len() - t) as u64) as usize;
                scratch.swap(t, j);
                chosen.push(scratch[t]);
            }
        } else {
            for _ in 0..need {
                chosen.push(rows[rng.below(rows.len() as u64) as usize]);
            }
        }
        per_class.push(chosen);
    }
    let mut batch = Vec::with_capacity(batch_size);
    'outer: for round in 0..need {
        for chosen in &per_class {
            if batch.len() == batch_size {
                break 'outer;
            }
            batch.push(chosen[round]);
        }
    }
    batch
}

/// Run `cfg.iterations` SGD steps over stratified mini-batches.
///
/// Each step optimizes `softmax_ce + mu * aux` where `aux` is the mode's
/// metric term. The metric scalars are recorded every step regardless of
/// mode; with `mu = 0` (or pure softmax mode) they are reported but not
/// back-propagated.
pub fn train(
    net: &mut NetworkState,
    dataset: &SampleBatch,
    mode: LossMode,
    cfg: &SgdConfig,
    weights: &LossWeights,
    kappa: f64,
    rng: &mut Rng,
) -> Result<TrainHistory> {
    cfg.validate()?;
    weights.validate()?;
    let by_class = class_rows(dataset.labels());
    if by_class.len() < 2 || dataset.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "training needs at least 2 samples in at least 2 classes, got {} samples in {} classes",
            dataset.len(),
            by_class.len()
        )));
    }
    if cfg.batch_size < 2 * by_class.len() {
        return Err(Error::InvalidInput(format!(
            "batch_size {} must be at least twice the class count {}",
            cfg.batch_size,
            by_class.len()
        )));
    }

    let mut history = TrainHistory::default();
    for step in 0..cfg.iterations {
        let indices = draw_batch(&by_class, cfg.batch_size, rng);
        let mini = dataset.gather(&indices);
        let (features, logits, cache) = forward(net, &mini)?;
        let (ce, d_logits) = softmax_ce(&logits, mini.labels())?;

        let (l_intra, l_inter, l_diversity, l_sml, sml_grad) =
            sml_terms_or_skip(&features, weights, &mut history.sml_skipped);

        let n = mini.len();
        let d = net.embedding_dim();
        let mut l_aux = 0.0;
        let mut d_features = Tensor::zeros(vec![n, d]);
        match mode {
            LossMode::Softmax => {}
            LossMode::SoftmaxSml => {
                if let Some(grad) = &sml_grad {
                    l_aux = l_sml;
                    if weights.mu != 0.0 {
                        d_features = grad.scale(weights.mu);
                    }
                }
            }
            LossMode::SoftmaxContrastive => {
                let (pairs, _skipped) = mine_pairs(&features, rng, n);
                let (loss, grad) = contrastive(&features, &pairs, kappa)?;
                l_aux = loss;
                if weights.mu != 0.0 {
                    d_features = grad.scale(weights.mu);
                }
            }
            LossMode::SoftmaxTriplet => {
                let (triplets, _skipped) = mine_triplets(&features, rng, n);
                let (loss, grad) = triplet(&features, &triplets, kappa)?;
                l_aux = loss;
                if weights.mu != 0.0 {
                    d_features = grad.scale(weights.mu);
                }
            }
        }

        let grads = backward(net, &cache, &d_features, &d_logits)?;
        net.apply_gradients(&grads, cfg.learning_rate)?;

        history.steps.push(StepRecord {
            step,
            ce,
            l_intra,
            l_inter,
            l_diversity,
            l_sml,
            l_aux,
            l_total: ce + weights.mu * l_aux,
        });
    }
    Ok(history)
}
