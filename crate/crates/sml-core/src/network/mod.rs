//! Patch-based convolutional feature extractor with exact reverse-mode
//! derivatives.
//!
//! The layer stack maps a p x p x B patch to a d-dimensional embedding
//! (the last layer must be dense). A separate dense classifier head maps
//! the embedding to class logits, so the backward pass can combine two
//! upstream gradients: one arriving through the head (cross-entropy) and
//! one injected directly at the embedding (the metric loss).
//!
//! Data layout is channel-last throughout: activations are [H, W, C]
//! row-major, conv kernels are [out_c, kh, kw, in_c]. Convolutions are
//! valid (no padding). `backward` never mutates weights; the trainer
//! applies gradients explicitly.

pub mod checkpoint;
pub mod train;

use crate::data::SampleBatch;
use crate::error::{Error, Result};
use crate::numerics::{sgd_step_inplace, Rng, Tensor};
use crate::parallel::maybe_par_map_indices;
use crate::sml::FeatureBatch;

/// One layer of the feature extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv2d {
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
    },
    Relu,
    Flatten,
    Dense {
        out_features: usize,
    },
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Relu => "relu",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
        }
    }
}

/// Activation shape flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActShape {
    Spatial { h: usize, w: usize, c: usize },
    Flat { n: usize },
}

impl ActShape {
    pub fn numel(&self) -> usize {
        match *self {
            ActShape::Spatial { h, w, c } => h * w * c,
            ActShape::Flat { n } => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// [out_c, kh, kw, in_c]
    pub kernel: Tensor,
    /// [out_c]
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// [in, out]
    pub weight: Tensor,
    /// [out]
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams {
    Conv(ConvParams),
    Dense(DenseParams),
}

/// Feature extractor weights plus the classifier head.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    specs: Vec<LayerSpec>,
    input_shape: [usize; 3],
    num_classes: usize,
    shapes: Vec<ActShape>,
    params: Vec<Option<LayerParams>>,
    head: DenseParams,
    version: u64,
}

/// Compute the activation shape after every layer, validating the chain.
pub fn shape_chain(specs: &[LayerSpec], input: [usize; 3]) -> Result<Vec<ActShape>> {
    let mut shapes = vec![ActShape::Spatial {
        h: input[0],
        w: input[1],
        c: input[2],
    }];
    for (index, spec) in specs.iter().enumerate() {
        let prev = *shapes.last().expect("non-empty");
        let err = |detail: String| Error::LayerChain {
            index,
            kind: spec.kind_name(),
            detail,
        };
        let next = match *spec {
            LayerSpec::Conv2d {
                out_channels,
                kernel_h,
                kernel_w,
            } => match prev {
                ActShape::Spatial { h, w, c } => {
                    if kernel_h == 0 || kernel_w == 0 || out_channels == 0 {
                        return Err(err("kernel extents and channels must be positive".into()));
                    }
                    if kernel_h > h || kernel_w > w {
                        return Err(err(format!(
                            "kernel {kernel_h}x{kernel_w} exceeds input {h}x{w}"
                        )));
                    }
                    let _ = c;
                    ActShape::Spatial {
                        h: h - kernel_h + 1,
                        w: w - kernel_w + 1,
                        c: out_channels,
                    }
                }
                ActShape::Flat { .. } => {
                    return Err(err("convolution requires a spatial input".into()))
                }
            },
            LayerSpec::Relu => prev,
            LayerSpec::Flatten => ActShape::Flat { n: prev.numel() },
            LayerSpec::Dense { out_features } => match prev {
                ActShape::Flat { n } => {
                    if out_features == 0 {
                        return Err(err("dense output must be positive".into()));
                    }
                    let _ = n;
                    ActShape::Flat { n: out_features }
                }
                ActShape::Spatial { .. } => {
                    return Err(err("dense layer requires a flattened input".into()))
                }
            },
        };
        shapes.push(next);
    }
    match shapes.last() {
        Some(ActShape::Flat { .. }) if matches!(specs.last(), Some(LayerSpec::Dense { .. })) => {}
        _ => {
            return Err(Error::LayerChain {
                index: specs.len().saturating_sub(1),
                kind: specs.last().map(|s| s.kind_name()).unwrap_or("none"),
                detail: "the final layer must be dense (it defines the embedding)".into(),
            })
        }
    }
    Ok(shapes)
}

/// He-normal weight scale: sqrt(2 / fan_in).
pub fn he_std(fan_in: usize) -> f64 {
    (2.0 / fan_in as f64).sqrt()
}

/// He-normal init: weights from normal(0, sqrt(2 / fan_in)), biases zero.
/// Draw order is layer order, kernel elements row-major, head last.
pub fn init_weights(
    specs: &[LayerSpec],
    input_shape: [usize; 3],
    num_classes: usize,
    rng: &mut Rng,
) -> Result<NetworkState> {
    if num_classes < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    let shapes = shape_chain(specs, input_shape)?;
    let mut params = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let layer = match *spec {
            LayerSpec::Conv2d {
                out_channels,
                kernel_h,
                kernel_w,
            } => {
                let in_c = match shapes[i] {
                    ActShape::Spatial { c, .. } => c,
                    ActShape::Flat { .. } => unreachable!("validated by shape_chain"),
                };
                let fan_in = kernel_h * kernel_w * in_c;
                let std = he_std(fan_in);
                Some(LayerParams::Conv(ConvParams {
                    kernel: rng.normal_tensor(
                        vec![out_channels, kernel_h, kernel_w, in_c],
                        0.0,
                        std,
                    )?,
                    bias: Tensor::zeros(vec![out_channels]),
                }))
            }
            LayerSpec::Dense { out_features } => {
                let fan_in = shapes[i].numel();
                let std = he_std(fan_in);
                Some(LayerParams::Dense(DenseParams {
                    weight: rng.normal_tensor(vec![fan_in, out_features], 0.0, std)?,
                    bias: Tensor::zeros(vec![out_features]),
                }))
            }
            LayerSpec::Relu | LayerSpec::Flatten => None,
        };
        params.push(layer);
    }
    let embedding = shapes.last().expect("non-empty").numel();
    let std = he_std(embedding);
    let head = DenseParams {
        weight: rng.normal_tensor(vec![embedding, num_classes], 0.0, std)?,
        bias: Tensor::zeros(vec![num_classes]),
    };
    Ok(NetworkState {
        specs: specs.to_vec(),
        input_shape,
        num_classes,
        shapes,
        params,
        head,
        version: 0,
    })
}

impl NetworkState {
    pub(crate) fn from_parts(
        specs: Vec<LayerSpec>,
        input_shape: [usize; 3],
        num_classes: usize,
        shapes: Vec<ActShape>,
        params: Vec<Option<LayerParams>>,
        head: DenseParams,
    ) -> Result<Self> {
        Ok(Self {
            specs,
            input_shape,
            num_classes,
            shapes,
            params,
            head,
            version: 0,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn embedding_dim(&self) -> usize {
        self.shapes.last().expect("non-empty").numel()
    }

    pub fn params(&self) -> &[Option<LayerParams>] {
        &self.params
    }

    pub fn head(&self) -> &DenseParams {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut DenseParams {
        &mut self.head
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Flat view of every weight tensor, layer order then head, used by
    /// gradient checking and the optimizer loop.
    pub fn weight_tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in self.params.iter_mut().flatten() {
            match layer {
                LayerParams::Conv(conv) => {
                    out.push(&mut conv.kernel);
                    out.push(&mut conv.bias);
                }
                LayerParams::Dense(dense) => {
                    out.push(&mut dense.weight);
                    out.push(&mut dense.bias);
                }
            }
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    pub fn weight_tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for layer in self.params.iter().flatten() {
            match layer {
                LayerParams::Conv(conv) => {
                    out.push(&conv.kernel);
                    out.push(&conv.bias);
                }
                LayerParams::Dense(dense) => {
                    out.push(&dense.weight);
                    out.push(&dense.bias);
                }
            }
        }
        out.push(&self.head.weight);
        out.push(&self.head.bias);
        out
    }

    /// Descend along `grads` and bump the version so outstanding caches
    /// become stale.
    pub fn apply_gradients(&mut self, grads: &NetworkGrads, learning_rate: f64) -> Result<()> {
        let grad_tensors = grads.tensors();
        let mut weights = self.weight_tensors_mut();
        if weights.len() != grad_tensors.len() {
            return Err(Error::InvalidInput(format!(
                "{} gradient tensors for {} weight tensors",
                grad_tensors.len(),
                weights.len()
            )));
        }
        for (w, g) in weights.iter_mut().zip(grad_tensors) {
            sgd_step_inplace(w, g, learning_rate)?;
        }
        self.version += 1;
        Ok(())
    }
}

/// Gradients of the loss w.r.t. every weight tensor, mirroring the network
/// parameter structure.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrads {
    pub layers: Vec<Option<LayerParams>>,
    pub head: DenseParams,
}

impl NetworkGrads {
    fn zeros_like(net: &NetworkState) -> Self {
        let layers = net
            .params
            .iter()
            .map(|layer| {
                layer.as_ref().map(|p| match p {
                    LayerParams::Conv(conv) => LayerParams::Conv(ConvParams {
                        kernel: Tensor::zeros(conv.kernel.shape().to_vec()),
                        bias: Tensor::zeros(conv.bias.shape().to_vec()),
                    }),
                    LayerParams::Dense(dense) => LayerParams::Dense(DenseParams {
                        weight: Tensor::zeros(dense.weight.shape().to_vec()),
                        bias: Tensor::zeros(dense.bias.shape().to_vec()),
                    }),
                })
            })
            .collect();
        Self {
            layers,
            head: DenseParams {
                weight: Tensor::zeros(net.head.weight.shape().to_vec()),
                bias: Tensor::zeros(net.head.bias.shape().to_vec()),
            },
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for layer in self.layers.iter().flatten() {
            match layer {
                LayerParams::Conv(conv) => {
                    out.push(&conv.kernel);
                    out.push(&conv.bias);
                }
                LayerParams::Dense(dense) => {
                    out.push(&dense.weight);
                    out.push(&dense.bias);
                }
            }
        }
        out.push(&self.head.weight);
        out.push(&self.head.bias);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in self.layers.iter_mut().flatten() {
            match layer {
                LayerParams::Conv(conv) => {
                    out.push(&mut conv.kernel);
                    out.push(&mut conv.bias);
                }
                LayerParams::Dense(dense) => {
                    out.push(&mut dense.weight);
                    out.push(&mut dense.bias);
                }
            }
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }
}

/// Activations recorded by `forward` for one batch.
#[derive(Debug, Clone)]
pub struct Cache {
    version: u64,
    /// inputs[s][l] is the input to layer l for sample s; the final entry
    /// is the embedding (input to the head).
    inputs: Vec<Vec<Vec<f64>>>,
}

impl Cache {
    pub fn batch_len(&self) -> usize {
        self.inputs.len()
    }
}

fn conv_forward(
    input: &[f64],
    (h, w, in_c): (usize, usize, usize),
    conv: &ConvParams,
) -> Vec<f64> {
    let kshape = conv.kernel.shape();
    let (out_c, kh, kw) = (kshape[0], kshape[1], kshape[2]);
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let kernel = conv.kernel.data();
    let bias = conv.bias.data();
    let mut out = vec![0.0; oh * ow * out_c];
    for y in 0..oh {
        for x in 0..ow {
            for oc in 0..out_c {
                let mut acc = bias[oc];
                for i in 0..kh {
                    for j in 0..kw {
                        let in_base = ((y + i) * w + (x + j)) * in_c;
                        let k_base = ((oc * kh + i) * kw + j) * in_c;
                        for ci in 0..in_c {
                            acc += input[in_base + ci] * kernel[k_base + ci];
                        }
                    }
                }
                out[(y * ow + x) * out_c + oc] = acc;
            }
        }
    }
    out
}

fn conv_backward(
    input: &[f64],
    (h, w, in_c): (usize, usize, usize),
    conv: &ConvParams,
    upstream: &[f64],
    d_kernel: &mut [f64],
    d_bias: &mut [f64],
) -> Vec<f64> {
    let kshape = conv.kernel.shape();
    let (out_c, kh, kw) = (kshape[0], kshape[1], kshape[2]);
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let kernel = conv.kernel.data();
    let mut d_input = vec![0.0; h * w * in_c];
    for y in 0..oh {
        for x in 0..ow {
            for oc in 0..out_c {
                let g = upstream[(y * ow + x) * out_c + oc];
                d_bias[oc] += g;
                for i in 0..kh {
                    for j in 0..kw {
                        let in_base = ((y + i) * w + (x + j)) * in_c;
                        let k_base = ((oc * kh + i) * kw + j) * in_c;
                        for ci in 0..in_c {
                            d_kernel[k_base + ci] += g * input[in_base + ci];
                            d_input[in_base + ci] += g * kernel[k_base + ci];
                        }
                    }
                }
            }
        }
    }
    d_input
}

fn dense_forward(input: &[f64], dense: &DenseParams) -> Vec<f64> {
    let shape = dense.weight.shape();
    let (n_in, n_out) = (shape[0], shape[1]);
    let weight = dense.weight.data();
    let mut out = dense.bias.data().to_vec();
    for i in 0..n_in {
        let x = input[i];
        let row = &weight[i * n_out..(i + 1) * n_out];
        for (o, &wv) in row.iter().enumerate() {
            out[o] += x * wv;
        }
    }
    out
}

fn dense_backward(
    input: &[f64],
    dense: &DenseParams,
    upstream: &[f64],
    d_weight: &mut [f64],
    d_bias: &mut [f64],
) -> Vec<f64> {
    let shape = dense.weight.shape();
    let (n_in, n_out) = (shape[0], shape[1]);
    let weight = dense.weight.data();
    for (o, &g) in upstream.iter().enumerate() {
        d_bias[o] += g;
    }
    let mut d_input = vec![0.0; n_in];
    for i in 0..n_in {
        let x = input[i];
        let w_row = &weight[i * n_out..(i + 1) * n_out];
        let dw_row = &mut d_weight[i * n_out..(i + 1) * n_out];
        let mut acc = 0.0;
        for o in 0..n_out {
            dw_row[o] += x * upstream[o];
            acc += w_row[o] * upstream[o];
        }
        d_input[i] = acc;
    }
    d_input
}

struct SampleForward {
    inputs: Vec<Vec<f64>>,
    embedding: Vec<f64>,
    logits: Vec<f64>,
}

fn forward_sample(net: &NetworkState, patch: &[f64]) -> SampleForward {
    let mut inputs = Vec::with_capacity(net.specs.len() + 1);
    let mut act = patch.to_vec();
    for (l, spec) in net.specs.iter().enumerate() {
        inputs.push(act.clone());
        act = match (spec, &net.params[l]) {
            (LayerSpec::Conv2d { .. }, Some(LayerParams::Conv(conv))) => {
                let (h, w, c) = match net.shapes[l] {
                    ActShape::Spatial { h, w, c } => (h, w, c),
                    ActShape::Flat { .. } => unreachable!("validated by shape_chain"),
                };
                conv_forward(&act, (h, w, c), conv)
            }
            (LayerSpec::Relu, None) => act.iter().map(|&v| v.max(0.0)).collect(),
            (LayerSpec::Flatten, None) => act,
            (LayerSpec::Dense { .. }, Some(LayerParams::Dense(dense))) => {
                dense_forward(&act, dense)
            }
            _ => unreachable!("params aligned with specs"),
        };
    }
    let logits = dense_forward(&act, &net.head);
    SampleForward {
        inputs,
        embedding: act,
        logits,
    }
}

/// Run the batch through the network. Returns the embeddings (as a
/// [`FeatureBatch`] carrying the batch labels), the N x num_classes logits,
/// and the cache consumed by [`backward`].
pub fn forward(net: &NetworkState, batch: &SampleBatch) -> Result<(FeatureBatch, Tensor, Cache)> {
    let expected = net.input_shape;
    let got = [batch.patch_size(), batch.patch_size(), batch.bands()];
    if expected != got {
        return Err(Error::ShapeMismatch {
            left: got.to_vec(),
            right: expected.to_vec(),
        });
    }
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = batch.len();
    let per_sample = maybe_par_map_indices(n, |s| forward_sample(net, batch.patch(s)));

    let d = net.embedding_dim();
    let classes = net.num_classes;
    let mut features = Vec::with_capacity(n * d);
    let mut logits = Vec::with_capacity(n * classes);
    let mut inputs = Vec::with_capacity(n);
    for mut sample in per_sample {
        features.extend_from_slice(&sample.embedding);
        logits.extend_from_slice(&sample.logits);
        sample.inputs.push(sample.embedding);
        inputs.push(sample.inputs);
    }
    let feature_batch = FeatureBatch::new(
        Tensor::from_vec(vec![n, d], features)?,
        batch.labels().to_vec(),
    )?;
    Ok((
        feature_batch,
        Tensor::from_vec(vec![n, classes], logits)?,
        Cache {
            version: net.version,
            inputs,
        },
    ))
}

fn backward_sample(
    net: &NetworkState,
    inputs: &[Vec<f64>],
    d_feature: &[f64],
    d_logit: &[f64],
) -> NetworkGrads {
    let mut grads = NetworkGrads::zeros_like(net);

    // Head first: its input is the embedding, and its input gradient joins
    // the directly injected embedding gradient.
    let embedding = inputs.last().expect("embedding cached");
    let mut upstream = dense_backward(
        embedding,
        &net.head,
        d_logit,
        grads.head.weight.data_mut(),
        grads.head.bias.data_mut(),
    );
    for (u, &g) in upstream.iter_mut().zip(d_feature) {
        *u += g;
    }

    for l in (0..net.specs.len()).rev() {
        let input = &inputs[l];
        upstream = match (&net.specs[l], &net.params[l], &mut grads.layers[l]) {
            (LayerSpec::Conv2d { .. }, Some(LayerParams::Conv(conv)), Some(LayerParams::Conv(g))) => {
                let (h, w, c) = match net.shapes[l] {
                    ActShape::Spatial { h, w, c } => (h, w, c),
                    ActShape::Flat { .. } => unreachable!(),
                };
                let (gk, gb) = (&mut g.kernel, &mut g.bias);
                conv_backward(
                    input,
                    (h, w, c),
                    conv,
                    &upstream,
                    gk.data_mut(),
                    gb.data_mut(),
                )
            }
            (LayerSpec::Relu, None, None) => upstream
                .iter()
                .zip(input.iter())
                .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
                .collect(),
            (LayerSpec::Flatten, None, None) => upstream,
            (LayerSpec::Dense { .. }, Some(LayerParams::Dense(dense)), Some(LayerParams::Dense(g))) => {
                let (gw, gb) = (&mut g.weight, &mut g.bias);
                dense_backward(input, dense, &upstream, gw.data_mut(), gb.data_mut())
            }
            _ => unreachable!("params aligned with specs"),
        };
    }
    grads
}

/// Gradients of the total loss w.r.t. every weight tensor.
///
/// `d_features` (N x d) is the gradient arriving directly at the embedding;
/// `d_logits` (N x num_classes) is the gradient arriving at the classifier
/// output. Per-sample contributions are summed in sample order.
pub fn backward(
    net: &NetworkState,
    cache: &Cache,
    d_features: &Tensor,
    d_logits: &Tensor,
) -> Result<NetworkGrads> {
    if cache.version != net.version {
        return Err(Error::StaleCache);
    }
    let n = cache.inputs.len();
    let d = net.embedding_dim();
    if d_features.shape() != [n, d] {
        return Err(Error::ShapeMismatch {
            left: d_features.shape().to_vec(),
            right: vec![n, d],
        });
    }
    if d_logits.shape() != [n, net.num_classes] {
        return Err(Error::ShapeMismatch {
            left: d_logits.shape().to_vec(),
            right: vec![n, net.num_classes],
        });
    }

    let per_sample = maybe_par_map_indices(n, |s| {
        backward_sample(net, &cache.inputs[s], d_features.row(s), d_logits.row(s))
    });

    // Fixed-order reduction keeps results bitwise identical for any thread
    // count.
    let mut total = NetworkGrads::zeros_like(net);
    for sample in &per_sample {
        let mut acc = total.tensors_mut();
        let part = sample.tensors();
        for (a, p) in acc.iter_mut().zip(part) {
            for (av, &pv) in a.data_mut().iter_mut().zip(p.data()) {
                *av += pv;
            }
        }
    }
    Ok(total)
}

/// The small default architecture: two 3x3 conv+relu stages, then a dense
/// embedding. Expects 5x5 input patches.
pub fn default_arch() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv2d {
            out_channels: 32,
            kernel_h: 3,
            kernel_w: 3,
        },
        LayerSpec::Relu,
        LayerSpec::Conv2d {
            out_channels: 64,
            kernel_h: 3,
            kernel_w: 3,
        },
        LayerSpec::Relu,
        LayerSpec::Flatten,
        LayerSpec::Dense { out_features: 64 },
    ]
}
