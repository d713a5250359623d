//! Hyperspectral cube storage, synthetic generation, patch extraction, and
//! the stratified train/test protocol.

pub mod format;
pub mod patches;
pub mod split;
pub mod synthetic;

pub use format::{read_cube, write_cube};
pub use patches::extract_patches;
pub use split::{read_split_csv, stratified_split, write_split_csv, SplitSpec};
pub use synthetic::generate_synthetic;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// H x W image with B spectral bands per pixel and per-pixel labels.
/// Label 0 means unlabeled; classes are 1..=num_classes.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperspectralCube {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    /// [H, W, B] row-major radiance.
    pub radiance: Tensor,
    /// H*W row-major labels.
    pub labels: Vec<u16>,
    pub class_names: Vec<String>,
}

impl HyperspectralCube {
    pub fn new(
        height: usize,
        width: usize,
        bands: usize,
        radiance: Tensor,
        labels: Vec<u16>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if radiance.shape() != [height, width, bands] {
            return Err(Error::ShapeDataMismatch {
                extents: radiance.shape().to_vec(),
                len: height * width * bands,
            });
        }
        if labels.len() != height * width {
            return Err(Error::InvalidInput(format!(
                "{} labels for {}x{} cube",
                labels.len(),
                height,
                width
            )));
        }
        if !radiance.all_finite() {
            return Err(Error::InvalidInput("non-finite radiance".into()));
        }
        let max = class_names.len() as u32;
        for (i, &label) in labels.iter().enumerate() {
            if label as u32 > max {
                return Err(Error::LabelOutOfRange {
                    label: label as u32,
                    max,
                });
            }
            let _ = i;
        }
        Ok(Self {
            height,
            width,
            bands,
            radiance,
            labels,
            class_names,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn label_at(&self, row: usize, col: usize) -> u16 {
        self.labels[row * self.width + col]
    }

    /// Spectrum of one pixel, length `bands`.
    pub fn spectrum(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.width + col) * self.bands;
        &self.radiance.data()[start..start + self.bands]
    }

    /// Coordinates of every labeled pixel, row-major order.
    pub fn labeled_coords(&self) -> Vec<(usize, usize)> {
        let mut coords = Vec::new();
        for row in 0..self.height {
            for col in 0..self.width {
                if self.label_at(row, col) != 0 {
                    coords.push((row, col));
                }
            }
        }
        coords
    }
}

/// Extracted patches with dense 0-based labels and their origin pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    /// [N, p, p, B] row-major.
    patches: Tensor,
    labels: Vec<usize>,
    coords: Vec<(usize, usize)>,
}

impl SampleBatch {
    pub fn new(patches: Tensor, labels: Vec<usize>, coords: Vec<(usize, usize)>) -> Result<Self> {
        let shape = patches.shape();
        if shape.len() != 4 {
            return Err(Error::InvalidInput(format!(
                "patches must be rank 4, got {shape:?}"
            )));
        }
        if shape[1] != shape[2] || shape[1] % 2 == 0 {
            return Err(Error::InvalidInput(format!(
                "patch extent must be square and odd, got {}x{}",
                shape[1], shape[2]
            )));
        }
        let n = shape[0];
        if labels.len() != n || coords.len() != n {
            return Err(Error::InvalidInput(format!(
                "{n} patches with {} labels and {} coords",
                labels.len(),
                coords.len()
            )));
        }
        Ok(Self {
            patches,
            labels,
            coords,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn patch_size(&self) -> usize {
        self.patches.shape()[1]
    }

    pub fn bands(&self) -> usize {
        self.patches.shape()[3]
    }

    pub fn patches(&self) -> &Tensor {
        &self.patches
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn coords(&self) -> &[(usize, usize)] {
        &self.coords
    }

    /// Flat data of patch `i`, length p*p*B.
    pub fn patch(&self, i: usize) -> &[f64] {
        let stride = self.patches.numel() / self.len();
        &self.patches.data()[i * stride..(i + 1) * stride]
    }

    /// New batch holding the selected rows, in the given order.
    pub fn gather(&self, indices: &[usize]) -> Self {
        let stride = self.patches.numel() / self.len();
        let mut data = Vec::with_capacity(indices.len() * stride);
        let mut labels = Vec::with_capacity(indices.len());
        let mut coords = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.patch(i));
            labels.push(self.labels[i]);
            coords.push(self.coords[i]);
        }
        let shape = self.patches.shape();
        Self {
            patches: Tensor::from_vec(vec![indices.len(), shape[1], shape[2], shape[3]], data)
                .expect("gather preserves stride"),
            labels,
            coords,
        }
    }
}
