//! Metric learning on batch class statistics for patch-based spectral
//! classification.
//!
//! The crate is organized around a small pipeline:
//!
//! - [`numerics`]: dense f64 tensors, a documented deterministic generator,
//!   and plain SGD.
//! - [`sml`]: the batch-statistical metric loss (intra-class variance,
//!   inter-class mean separation, diversity of means) with exact analytic
//!   gradients and a finite-difference checker.
//! - [`baseline`]: softmax cross-entropy head plus contrastive and triplet
//!   comparison losses.
//! - [`network`]: a small convolutional feature extractor with manual
//!   reverse-mode derivatives, joint trainer, and checkpoint format.
//! - [`data`]: labeled cube storage, synthetic generation, patch
//!   extraction, stratified splits.
//! - [`eval`]: OA/AA/kappa, classification maps, multi-seed runs, and the
//!   training-set-size sweep.
//!
//! Every operation is deterministic given its seeds; reductions run in
//! fixed order so repeated runs are bitwise identical. Batch-level loops
//! run on rayon when the `parallel` feature (default) is enabled and
//! sequentially otherwise, with identical results either way.

pub mod baseline;
pub mod data;
pub mod error;
pub mod eval;
pub mod network;
pub mod numerics;
pub mod parallel;
pub mod sml;

pub use error::{Error, Result};
