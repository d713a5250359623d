//! Batch-statistical metric loss.
//!
//! Embeddings are grouped by class within a batch. The loss combines three
//! scalar terms built from per-class statistics:
//!
//! - intra: mean over classes of the per-class average squared distance of
//!   features to their class mean (pulled down),
//! - inter: scaled sum of squared distances between class means over
//!   unordered pairs (pushed up),
//! - diversity: variance of the class means around their common center
//!   (pushed up).
//!
//! `total = alpha * intra - beta * inter - lambda * diversity`, and the
//! analytic gradient with respect to every feature row is returned alongside
//! the scalars. Gradients flow through the class means and the center, and
//! the per-class count normalization makes every term invariant to
//! duplicating a class's samples.
//!
//! All sums run left-to-right over rows in batch order (grouped per class in
//! ascending class id), so results are reproducible bitwise.

pub mod gradcheck;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Embedding rows paired with integer class labels.
#[derive(Debug, Clone)]
pub struct FeatureBatch {
    features: Tensor,
    labels: Vec<usize>,
}

impl FeatureBatch {
    /// `features` must be rank-2 (N x d) with one label per row.
    pub fn new(features: Tensor, labels: Vec<usize>) -> Result<Self> {
        if features.shape().len() != 2 {
            return Err(Error::InvalidInput(format!(
                "features must be rank 2, got shape {:?}",
                features.shape()
            )));
        }
        let n = features.shape()[0];
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        if labels.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} feature rows",
                labels.len(),
                n
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.shape()[1]
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Replace the feature matrix, keeping labels (used by perturbation tests).
    pub fn with_features(&self, features: Tensor) -> Result<Self> {
        Self::new(features, self.labels.clone())
    }
}

/// Per-class counts, means, scalar variances, and the center of the means
/// for one batch.
#[derive(Debug, Clone)]
pub struct ClassStats {
    /// Class ids present in the batch, ascending.
    pub present_classes: Vec<usize>,
    /// Sample count per present class.
    pub counts: Vec<usize>,
    /// Per-class mean embedding, one d-vector per present class.
    pub means: Vec<Vec<f64>>,
    /// Per-class average squared distance to the class mean.
    pub variances: Vec<f64>,
    /// Mean of the class means.
    pub center: Vec<f64>,
}

impl ClassStats {
    /// Number of classes present in the batch.
    pub fn lambda_eff(&self) -> usize {
        self.present_classes.len()
    }
}

/// Loss term weights. `mu` scales the whole metric term against the
/// cross-entropy head during joint training.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.01,
            lambda: 0.001,
            mu: 0.0002,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("lambda", self.lambda),
            ("mu", self.mu),
        ] {
            if !(v >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "loss weight {name} must be >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Forward scalars and the gradient of the combined loss w.r.t. every
/// feature row.
#[derive(Debug, Clone)]
pub struct SmlOutput {
    pub l_intra: f64,
    pub l_inter: f64,
    pub l_diversity: f64,
    pub l_total: f64,
    /// N x d, row i is the partial of `l_total` w.r.t. feature row i.
    pub d_features: Tensor,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

/// Per-class means, variances, and the center of the means.
///
/// A single present class is legal here; restrictions apply in the loss
/// terms that need at least two.
pub fn class_stats(batch: &FeatureBatch) -> ClassStats {
    let d = batch.dim();
    let mut present: Vec<usize> = batch.labels().to_vec();
    present.sort_unstable();
    present.dedup();

    let mut counts = Vec::with_capacity(present.len());
    let mut means = Vec::with_capacity(present.len());
    let mut variances = Vec::with_capacity(present.len());

    for &class in &present {
        let rows: Vec<usize> = (0..batch.len())
            .filter(|&i| batch.labels()[i] == class)
            .collect();
        let n_k = rows.len();
        let mut mean = vec![0.0; d];
        for &i in &rows {
            for (m, &v) in mean.iter_mut().zip(batch.feature_row(i)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n_k as f64;
        }
        let mut var = 0.0;
        for &i in &rows {
            var += squared_distance(&mean, batch.feature_row(i));
        }
        var /= n_k as f64;
        counts.push(n_k);
        means.push(mean);
        variances.push(var);
    }

    let lambda = present.len() as f64;
    let mut center = vec![0.0; d];
    for mean in &means {
        for (c, &m) in center.iter_mut().zip(mean) {
            *c += m;
        }
    }
    for c in &mut center {
        *c /= lambda;
    }

    ClassStats {
        present_classes: present,
        counts,
        means,
        variances,
        center,
    }
}

/// Mean of the per-class variances.
pub fn l_intra(stats: &ClassStats) -> f64 {
    let lambda = stats.lambda_eff() as f64;
    let mut acc = 0.0;
    for &v in &stats.variances {
        acc += v;
    }
    acc / lambda
}

/// `(2 / lambda^2) * sum over unordered pairs of squared mean distance`.
pub fn l_inter(stats: &ClassStats) -> Result<f64> {
    let lambda = stats.lambda_eff();
    if lambda < 2 {
        return Err(Error::SingleClass);
    }
    let mut acc = 0.0;
    for i in 0..lambda {
        for j in (i + 1)..lambda {
            acc += squared_distance(&stats.means[i], &stats.means[j]);
        }
    }
    Ok(2.0 / (lambda as f64 * lambda as f64) * acc)
}

/// Variance of the class means around their center.
pub fn l_diversity(stats: &ClassStats) -> Result<f64> {
    let lambda = stats.lambda_eff();
    if lambda < 2 {
        return Err(Error::SingleClass);
    }
    let mut acc = 0.0;
    for mean in &stats.means {
        acc += squared_distance(&stats.center, mean);
    }
    Ok(acc / lambda as f64)
}

fn forward_terms(batch: &FeatureBatch, w: &LossWeights) -> Result<(f64, f64, f64, f64, ClassStats)> {
    let stats = class_stats(batch);
    if stats.lambda_eff() < 2 {
        return Err(Error::SingleClass);
    }
    let intra = l_intra(&stats);
    let inter = l_inter(&stats)?;
    let diversity = l_diversity(&stats)?;
    let total = w.alpha * intra - w.beta * inter - w.lambda * diversity;
    Ok((intra, inter, diversity, total, stats))
}

/// Combined forward pass plus the analytic gradient for every feature row.
///
/// For row i in class k (with n_k members, lambda classes present):
///
/// ```text
/// dL/dz_i = alpha * (2 / (lambda n_k)) (z_i - mean_k)
///         - beta  * (4 / lambda^2) (1 / n_k) sum_{l != k} (mean_k - mean_l)
///         - lambda_w * (2 / (lambda n_k)) (mean_k - center)
/// ```
///
/// Errors with [`Error::SingleClass`] when fewer than two classes are
/// present; the trainer decides the skip policy.
pub fn sml_forward_backward(batch: &FeatureBatch, w: &LossWeights) -> Result<SmlOutput> {
    let (intra, inter, diversity, total, stats) = forward_terms(batch, w)?;
    let d = batch.dim();
    let lambda = stats.lambda_eff();
    let lambda_f = lambda as f64;

    // Per-class part of the gradient that does not depend on the row:
    // the inter and diversity contributions through the class mean.
    let mut class_part: Vec<Vec<f64>> = Vec::with_capacity(lambda);
    for k in 0..lambda {
        let n_k = stats.counts[k] as f64;
        let mut part = vec![0.0; d];
        let inter_coeff = w.beta * 4.0 / (lambda_f * lambda_f) / n_k;
        for l in 0..lambda {
            if l == k {
                continue;
            }
            for j in 0..d {
                part[j] -= inter_coeff * (stats.means[k][j] - stats.means[l][j]);
            }
        }
        let div_coeff = w.lambda * 2.0 / lambda_f / n_k;
        for j in 0..d {
            part[j] -= div_coeff * (stats.means[k][j] - stats.center[j]);
        }
        class_part.push(part);
    }

    let mut grad = vec![0.0; batch.len() * d];
    for i in 0..batch.len() {
        let class = batch.labels()[i];
        let k = stats
            .present_classes
            .binary_search(&class)
            .expect("row label always present in stats");
        let n_k = stats.counts[k] as f64;
        let intra_coeff = w.alpha * 2.0 / lambda_f / n_k;
        let row = batch.feature_row(i);
        let out = &mut grad[i * d..(i + 1) * d];
        for j in 0..d {
            out[j] = intra_coeff * (row[j] - stats.means[k][j]) + class_part[k][j];
        }
    }

    Ok(SmlOutput {
        l_intra: intra,
        l_inter: inter,
        l_diversity: diversity,
        l_total: total,
        d_features: Tensor::from_vec(vec![batch.len(), d], grad)?,
    })
}

/// Forward scalars only; the function differentiated by the gradient checker.
pub fn sml_total(batch: &FeatureBatch, w: &LossWeights) -> Result<f64> {
    forward_terms(batch, w).map(|(_, _, _, total, _)| total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn batch_1d(values: &[f64], labels: &[usize]) -> FeatureBatch {
        let features = Tensor::from_vec(vec![values.len(), 1], values.to_vec()).unwrap();
        FeatureBatch::new(features, labels.to_vec()).unwrap()
    }

    fn batch_2d(rows: &[[f64; 2]], labels: &[usize]) -> FeatureBatch {
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        let features = Tensor::from_vec(vec![rows.len(), 2], data).unwrap();
        FeatureBatch::new(features, labels.to_vec()).unwrap()
    }

    #[test]
    fn two_point_mean_and_variance() {
        let batch = batch_2d(&[[0.0, 0.0], [2.0, 2.0]], &[0, 0]);
        let stats = class_stats(&batch);
        assert_eq!(stats.lambda_eff(), 1);
        assert_eq!(stats.means[0], vec![1.0, 1.0]);
        assert_eq!(stats.variances[0], 2.0);
        assert_eq!(stats.center, vec![1.0, 1.0]);
    }

    #[test]
    fn identical_samples_have_zero_variance() {
        let batch = batch_2d(&[[3.0, -1.0], [3.0, -1.0], [3.0, -1.0]], &[0, 0, 0]);
        let stats = class_stats(&batch);
        assert_eq!(stats.variances[0], 0.0);
    }

    #[test]
    fn singleton_class_has_zero_variance() {
        let batch = batch_1d(&[1.0, 5.0, 7.0], &[0, 1, 1]);
        let stats = class_stats(&batch);
        assert_eq!(stats.counts, vec![1, 2]);
        assert_eq!(stats.variances[0], 0.0);
        assert_eq!(stats.variances[1], 1.0);
    }

    /// Independent route: variance via E||z||^2 - ||mean||^2, means summed
    /// in reverse row order.
    fn two_pass_oracle(batch: &FeatureBatch) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let d = batch.dim();
        let mut classes: Vec<usize> = batch.labels().to_vec();
        classes.sort_unstable();
        classes.dedup();
        let mut means = Vec::new();
        let mut vars = Vec::new();
        for &c in &classes {
            let rows: Vec<usize> = (0..batch.len())
                .rev()
                .filter(|&i| batch.labels()[i] == c)
                .collect();
            let n = rows.len() as f64;
            let mut mean = vec![0.0; d];
            let mut sq = 0.0;
            for &i in &rows {
                let row = batch.feature_row(i);
                for j in 0..d {
                    mean[j] += row[j] / n;
                    sq += row[j] * row[j] / n;
                }
            }
            let norm2: f64 = mean.iter().map(|m| m * m).sum();
            means.push(mean);
            vars.push(sq - norm2);
        }
        let lam = classes.len() as f64;
        let mut center = vec![0.0; d];
        for mean in means.iter().rev() {
            for j in 0..d {
                center[j] += mean[j] / lam;
            }
        }
        (means, vars, center)
    }

    #[test]
    fn stats_match_independent_oracle() {
        let mut rng = Rng::new(77);
        for _ in 0..20 {
            let n = 4 + rng.below(30) as usize;
            let d = 1 + rng.below(6) as usize;
            let lam = 2 + rng.below(4) as usize;
            let features = rng.normal_tensor(vec![n, d], 0.0, 1.5).unwrap();
            let labels: Vec<usize> = (0..n)
                .map(|i| if i < lam { i } else { rng.below(lam as u64) as usize })
                .collect();
            let batch = FeatureBatch::new(features, labels).unwrap();
            let stats = class_stats(&batch);
            let (means, vars, center) = two_pass_oracle(&batch);
            for k in 0..stats.lambda_eff() {
                for j in 0..batch.dim() {
                    let a = stats.means[k][j];
                    let b = means[k][j];
                    assert!(
                        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0),
                        "mean[{k}][{j}]: {a} vs {b}"
                    );
                }
                let (a, b) = (stats.variances[k], vars[k]);
                assert!(
                    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0),
                    "variance[{k}]: {a} vs {b}"
                );
            }
            for j in 0..batch.dim() {
                let (a, b) = (stats.center[j], center[j]);
                assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
            }
        }
    }

    #[test]
    fn intra_hand_values() {
        // single 1-d class {-1, +1}: mean 0, variance 1
        let stats = class_stats(&batch_1d(&[-1.0, 1.0], &[0, 0]));
        assert_eq!(l_intra(&stats), 1.0);

        // classes collapsed to points
        let stats = class_stats(&batch_1d(&[2.0, 2.0, 5.0, 5.0], &[0, 0, 1, 1]));
        assert_eq!(l_intra(&stats), 0.0);

        // A={0,2}, B={4,6}: I_A = I_B = 1
        let stats = class_stats(&batch_1d(&[0.0, 2.0, 4.0, 6.0], &[0, 0, 1, 1]));
        assert_eq!(l_intra(&stats), 1.0);
    }

    #[test]
    fn inter_hand_values() {
        // equal means -> 0
        let stats = class_stats(&batch_1d(&[1.0, 3.0, 0.0, 4.0], &[0, 0, 1, 1]));
        assert_eq!(l_inter(&stats).unwrap(), 0.0);

        // means {1, 5}: (2/4) * 16 = 8
        let stats = class_stats(&batch_1d(&[0.0, 2.0, 4.0, 6.0], &[0, 0, 1, 1]));
        assert_eq!(l_inter(&stats).unwrap(), 8.0);

        // three coincident means -> 0
        let stats = class_stats(&batch_1d(&[2.0, 2.0, 2.0], &[0, 1, 2]));
        assert_eq!(l_inter(&stats).unwrap(), 0.0);
    }

    #[test]
    fn inter_rejects_single_class() {
        let stats = class_stats(&batch_1d(&[1.0, 2.0], &[0, 0]));
        let err = l_inter(&stats).unwrap_err();
        assert_eq!(
            err.to_string(),
            "inter-class term undefined for a single class"
        );
    }

    #[test]
    fn diversity_hand_values() {
        // all means equal -> 0
        let stats = class_stats(&batch_1d(&[1.0, 3.0, 0.0, 4.0], &[0, 0, 1, 1]));
        assert_eq!(l_diversity(&stats).unwrap(), 0.0);

        // means {1, 5}: center 3 -> (4 + 4) / 2 = 4
        let stats = class_stats(&batch_1d(&[0.0, 2.0, 4.0, 6.0], &[0, 0, 1, 1]));
        assert_eq!(l_diversity(&stats).unwrap(), 4.0);

        // means symmetric about origin {-m, +m} -> ||m||^2
        let stats = class_stats(&batch_2d(&[[-1.0, -2.0], [1.0, 2.0]], &[0, 1]));
        assert_eq!(l_diversity(&stats).unwrap(), 5.0);
    }

    #[test]
    fn combined_hand_example() {
        let batch = batch_1d(&[0.0, 2.0, 4.0, 6.0], &[0, 0, 1, 1]);
        let out = sml_forward_backward(&batch, &LossWeights::default()).unwrap();
        assert!((out.l_intra - 1.0).abs() <= 1e-12);
        assert!((out.l_inter - 8.0).abs() <= 1e-12);
        assert!((out.l_diversity - 4.0).abs() <= 1e-12);
        assert!((out.l_total - 0.916).abs() <= 1e-12);
    }

    #[test]
    fn zero_weights_zero_everything() {
        let batch = batch_1d(&[0.0, 2.0, 4.0, 6.0], &[0, 0, 1, 1]);
        let w = LossWeights {
            alpha: 0.0,
            beta: 0.0,
            lambda: 0.0,
            mu: 0.0,
        };
        let out = sml_forward_backward(&batch, &w).unwrap();
        assert_eq!(out.l_total, 0.0);
        assert!(out.d_features.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_class_batch_rejected() {
        let batch = batch_1d(&[1.0, 2.0, 3.0], &[4, 4, 4]);
        assert!(matches!(
            sml_forward_backward(&batch, &LossWeights::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn total_is_exact_combination() {
        let mut rng = Rng::new(5);
        for _ in 0..10 {
            let features = rng.normal_tensor(vec![12, 4], 0.0, 2.0).unwrap();
            let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
            let batch = FeatureBatch::new(features, labels).unwrap();
            let w = LossWeights {
                alpha: rng.next_f64() * 2.0,
                beta: rng.next_f64(),
                lambda: rng.next_f64(),
                mu: 0.1,
            };
            let out = sml_forward_backward(&batch, &w).unwrap();
            let expected = w.alpha * out.l_intra - w.beta * out.l_inter - w.lambda * out.l_diversity;
            assert_eq!(out.l_total, expected);
        }
    }

    mod invariants {
        use super::*;
        use crate::numerics::Rng;
        use proptest::prelude::*;

        fn arb_batch() -> impl Strategy<Value = (FeatureBatch, LossWeights)> {
            (2usize..5, 1usize..6, 0u64..1 << 48).prop_map(|(lam, d, seed)| {
                let mut rng = Rng::new(seed);
                let n = lam * 2 + rng.below(20) as usize;
                let features = rng.normal_tensor(vec![n, d], 0.0, 1.0).unwrap();
                let labels: Vec<usize> = (0..n)
                    .map(|i| {
                        if i < lam * 2 {
                            i % lam
                        } else {
                            rng.below(lam as u64) as usize
                        }
                    })
                    .collect();
                let w = LossWeights {
                    alpha: 0.25 + rng.next_f64(),
                    beta: rng.next_f64(),
                    lambda: rng.next_f64(),
                    mu: 1.0,
                };
                (FeatureBatch::new(features, labels).unwrap(), w)
            })
        }

        fn rel_close(a: f64, b: f64, tol: f64) -> bool {
            (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
        }

        proptest! {
            #[test]
            fn translation_of_one_class_keeps_intra((batch, w) in arb_batch()) {
                let out = sml_forward_backward(&batch, &w).unwrap();
                let target = batch.labels()[0];
                let d = batch.dim();
                let mut data = batch.features().data().to_vec();
                for i in 0..batch.len() {
                    if batch.labels()[i] == target {
                        for j in 0..d {
                            data[i * d + j] += 3.5 - j as f64;
                        }
                    }
                }
                let moved = batch
                    .with_features(Tensor::from_vec(vec![batch.len(), d], data).unwrap())
                    .unwrap();
                let out2 = sml_forward_backward(&moved, &w).unwrap();
                prop_assert!(rel_close(out.l_intra, out2.l_intra, 1e-9));
            }

            #[test]
            fn global_translation_keeps_all_terms((batch, w) in arb_batch()) {
                let out = sml_forward_backward(&batch, &w).unwrap();
                let d = batch.dim();
                let shift: Vec<f64> = (0..d).map(|j| 1.0 + 0.5 * j as f64).collect();
                let mut data = batch.features().data().to_vec();
                for i in 0..batch.len() {
                    for j in 0..d {
                        data[i * d + j] += shift[j];
                    }
                }
                let moved = batch
                    .with_features(Tensor::from_vec(vec![batch.len(), d], data).unwrap())
                    .unwrap();
                let out2 = sml_forward_backward(&moved, &w).unwrap();
                prop_assert!(rel_close(out.l_intra, out2.l_intra, 1e-9));
                prop_assert!(rel_close(out.l_inter, out2.l_inter, 1e-9));
                prop_assert!(rel_close(out.l_diversity, out2.l_diversity, 1e-9));
            }

            #[test]
            fn scaling_features_scales_terms_quadratically((batch, w) in arb_batch()) {
                let s = 1.75;
                let out = sml_forward_backward(&batch, &w).unwrap();
                let scaled = batch.with_features(batch.features().scale(s)).unwrap();
                let out2 = sml_forward_backward(&scaled, &w).unwrap();
                prop_assert!(rel_close(out2.l_intra, s * s * out.l_intra, 1e-9));
                prop_assert!(rel_close(out2.l_inter, s * s * out.l_inter, 1e-9));
                prop_assert!(rel_close(out2.l_diversity, s * s * out.l_diversity, 1e-9));
            }

            #[test]
            fn duplicating_a_class_changes_no_term((batch, w) in arb_batch()) {
                let out = sml_forward_backward(&batch, &w).unwrap();
                let target = batch.labels()[0];
                let d = batch.dim();
                let mut data = batch.features().data().to_vec();
                let mut labels = batch.labels().to_vec();
                for i in 0..batch.len() {
                    if batch.labels()[i] == target {
                        data.extend_from_slice(batch.feature_row(i));
                        labels.push(target);
                    }
                }
                let n2 = labels.len();
                let doubled = FeatureBatch::new(
                    Tensor::from_vec(vec![n2, d], data).unwrap(),
                    labels,
                )
                .unwrap();
                let out2 = sml_forward_backward(&doubled, &w).unwrap();
                prop_assert!(rel_close(out.l_intra, out2.l_intra, 1e-9));
                prop_assert!(rel_close(out.l_inter, out2.l_inter, 1e-9));
                prop_assert!(rel_close(out.l_diversity, out2.l_diversity, 1e-9));
            }

            #[test]
            fn intra_gradient_sums_to_zero_per_class((batch, _w) in arb_batch()) {
                // isolate the intra term
                let w = LossWeights { alpha: 1.0, beta: 0.0, lambda: 0.0, mu: 1.0 };
                let out = sml_forward_backward(&batch, &w).unwrap();
                let d = batch.dim();
                let stats = class_stats(&batch);
                for &class in &stats.present_classes {
                    for j in 0..d {
                        let mut acc = 0.0;
                        for i in 0..batch.len() {
                            if batch.labels()[i] == class {
                                acc += out.d_features.row(i)[j];
                            }
                        }
                        prop_assert!(acc.abs() <= 1e-9, "class {class} dim {j}: {acc}");
                    }
                }
            }

            #[test]
            fn permutation_reorders_gradient_rows((batch, w) in arb_batch()) {
                let out = sml_forward_backward(&batch, &w).unwrap();
                let n = batch.len();
                let d = batch.dim();
                let perm: Vec<usize> = (0..n).rev().collect();
                let mut data = Vec::with_capacity(n * d);
                let mut labels = Vec::with_capacity(n);
                for &i in &perm {
                    data.extend_from_slice(batch.feature_row(i));
                    labels.push(batch.labels()[i]);
                }
                let permuted = FeatureBatch::new(
                    Tensor::from_vec(vec![n, d], data).unwrap(),
                    labels,
                )
                .unwrap();
                let out2 = sml_forward_backward(&permuted, &w).unwrap();
                prop_assert!(rel_close(out.l_intra, out2.l_intra, 1e-9));
                prop_assert!(rel_close(out.l_inter, out2.l_inter, 1e-9));
                prop_assert!(rel_close(out.l_diversity, out2.l_diversity, 1e-9));
                for (new_i, &old_i) in perm.iter().enumerate() {
                    for j in 0..d {
                        prop_assert!(rel_close(
                            out2.d_features.row(new_i)[j],
                            out.d_features.row(old_i)[j],
                            1e-9
                        ));
                    }
                }
            }
        }
    }
}
