//! Softmax cross-entropy head and pairwise/triplet comparison losses.
//!
//! The pairwise and triplet losses hinge their negative terms at zero
//! (`max(0, .)`); without the hinge both objectives are unbounded below.
//! The subgradient at a hinge kink and at zero distance is zero.

use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};
use crate::sml::FeatureBatch;

/// Index pairs with a positive/negative flag.
#[derive(Debug, Clone, Default)]
pub struct PairSet {
    pub pairs: Vec<(usize, usize, bool)>,
}

/// (anchor, positive, negative) index triples.
#[derive(Debug, Clone, Default)]
pub struct TripletSet {
    pub triplets: Vec<(usize, usize, usize)>,
}

/// Mean negative log-softmax of the true class, with the gradient
/// `(softmax - one_hot) / N` per row.
pub fn softmax_ce(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let shape = logits.shape();
    if shape.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "logits must be rank 2, got {shape:?}"
        )));
    }
    let (n, classes) = (shape[0], shape[1]);
    if labels.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} logit rows",
            labels.len(),
            n
        )));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; n * classes];
    for i in 0..n {
        let row = logits.row(i);
        let label = labels[i];
        if label >= classes {
            return Err(Error::InvalidInput(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut sum_exp = 0.0;
        for &v in row {
            sum_exp += (v - max).exp();
        }
        let log_sum = max + sum_exp.ln();
        loss += log_sum - row[label];
        let out = &mut grad[i * classes..(i + 1) * classes];
        for (c, &v) in row.iter().enumerate() {
            let softmax = (v - log_sum).exp();
            out[c] = (softmax - if c == label { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    Ok((
        loss / n as f64,
        Tensor::from_vec(vec![n, classes], grad)?,
    ))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc.sqrt()
}

/// Add `scale * (z_a - z_b) / ||z_a - z_b||` to gradient row `a` and its
/// negation to row `b`; no-op at zero distance (subgradient 0).
fn add_distance_grad(
    grad: &mut [f64],
    d: usize,
    batch: &FeatureBatch,
    a: usize,
    b: usize,
    dist: f64,
    scale: f64,
) {
    if dist == 0.0 {
        return;
    }
    let (za, zb) = (batch.feature_row(a), batch.feature_row(b));
    for j in 0..d {
        let unit = (za[j] - zb[j]) / dist;
        grad[a * d + j] += scale * unit;
        grad[b * d + j] -= scale * unit;
    }
}

/// Pairwise loss: positives pay their distance, negatives pay
/// `max(0, kappa - distance)`.
pub fn contrastive(
    batch: &FeatureBatch,
    pairs: &PairSet,
    kappa: f64,
) -> Result<(f64, Tensor)> {
    if !(kappa > 0.0) {
        return Err(Error::NonPositive {
            what: "kappa",
            got: kappa,
        });
    }
    let d = batch.dim();
    let mut loss = 0.0;
    let mut grad = vec![0.0; batch.len() * d];
    for &(a, b, positive) in &pairs.pairs {
        let dist = distance(batch.feature_row(a), batch.feature_row(b));
        if positive {
            loss += dist;
            add_distance_grad(&mut grad, d, batch, a, b, dist, 1.0);
        } else if kappa - dist > 0.0 {
            loss += kappa - dist;
            add_distance_grad(&mut grad, d, batch, a, b, dist, -1.0);
        }
    }
    Ok((loss, Tensor::from_vec(vec![batch.len(), d], grad)?))
}

/// Triplet loss: `max(0, D(a,p) + kappa - D(a,n))` per triple.
pub fn triplet(
    batch: &FeatureBatch,
    triplets: &TripletSet,
    kappa: f64,
) -> Result<(f64, Tensor)> {
    if !(kappa > 0.0) {
        return Err(Error::NonPositive {
            what: "kappa",
            got: kappa,
        });
    }
    let d = batch.dim();
    let mut loss = 0.0;
    let mut grad = vec![0.0; batch.len() * d];
    for &(a, p, n) in &triplets.triplets {
        let d_ap = distance(batch.feature_row(a), batch.feature_row(p));
        let d_an = distance(batch.feature_row(a), batch.feature_row(n));
        let margin = d_ap + kappa - d_an;
        if margin > 0.0 {
            loss += margin;
            add_distance_grad(&mut grad, d, batch, a, p, d_ap, 1.0);
            add_distance_grad(&mut grad, d, batch, a, n, d_an, -1.0);
        }
    }
    Ok((loss, Tensor::from_vec(vec![batch.len(), d], grad)?))
}

fn rows_by_class(batch: &FeatureBatch) -> Vec<(usize, Vec<usize>)> {
    let mut classes: Vec<usize> = batch.labels().to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
        .into_iter()
        .map(|c| {
            let rows = (0..batch.len())
                .filter(|&i| batch.labels()[i] == c)
                .collect();
            (c, rows)
        })
        .collect()
}

/// Uniform random pairs, balanced half positive / half negative.
/// Returns the mined set and the number of requested pairs that had to be
/// skipped because no valid construction exists.
pub fn mine_pairs(batch: &FeatureBatch, rng: &mut Rng, count: usize) -> (PairSet, usize) {
    let by_class = rows_by_class(batch);
    let multi: Vec<&Vec<usize>> = by_class
        .iter()
        .filter(|(_, rows)| rows.len() >= 2)
        .map(|(_, rows)| rows)
        .collect();
    let n_pos = count / 2 + count % 2;
    let n_neg = count / 2;
    let mut pairs = Vec::with_capacity(count);
    let mut skipped = 0;

    for _ in 0..n_pos {
        if multi.is_empty() {
            skipped += 1;
            continue;
        }
        let rows = multi[rng.below(multi.len() as u64) as usize];
        let a = rows[rng.below(rows.len() as u64) as usize];
        let b = loop {
            let candidate = rows[rng.below(rows.len() as u64) as usize];
            if candidate != a {
                break candidate;
            }
        };
        pairs.push((a, b, true));
    }

    for _ in 0..n_neg {
        if by_class.len() < 2 {
            skipped += 1;
            continue;
        }
        let a = rng.below(batch.len() as u64) as usize;
        let b = loop {
            let candidate = rng.below(batch.len() as u64) as usize;
            if batch.labels()[candidate] != batch.labels()[a] {
                break candidate;
            }
        };
        pairs.push((a, b, false));
    }

    (PairSet { pairs }, skipped)
}

/// Uniform random valid (anchor, positive, negative) triples.
pub fn mine_triplets(batch: &FeatureBatch, rng: &mut Rng, count: usize) -> (TripletSet, usize) {
    let by_class = rows_by_class(batch);
    let anchor_rows: Vec<usize> = by_class
        .iter()
        .filter(|(_, rows)| rows.len() >= 2)
        .flat_map(|(_, rows)| rows.iter().copied())
        .collect();
    let mut triplets = Vec::with_capacity(count);
    let mut skipped = 0;
    for _ in 0..count {
        if anchor_rows.is_empty() || by_class.len() < 2 {
            skipped += 1;
            continue;
        }
        let a = anchor_rows[rng.below(anchor_rows.len() as u64) as usize];
        let class = batch.labels()[a];
        let same: &Vec<usize> = by_class
            .iter()
            .find(|(c, _)| *c == class)
            .map(|(_, rows)| rows)
            .expect("anchor class present");
        let p = loop {
            let candidate = same[rng.below(same.len() as u64) as usize];
            if candidate != a {
                break candidate;
            }
        };
        let n = loop {
            let candidate = rng.below(batch.len() as u64) as usize;
            if batch.labels()[candidate] != class {
                break candidate;
            }
        };
        triplets.push((a, p, n));
    }
    (TripletSet { triplets }, skipped)
}
