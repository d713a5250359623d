//! Spatial-spectral patch extraction with mirror padding.

use crate::data::{HyperspectralCube, SampleBatch};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Reflect an out-of-range index back into `[0, len)` without repeating the
/// edge sample: -1 maps to 1, len maps to len - 2.
pub fn mirror_index(i: isize, len: usize) -> usize {
    debug_assert!(len > 0);
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut m = i % period;
    if m < 0 {
        m += period;
    }
    if m >= len as isize {
        m = period - m;
    }
    m as usize
}

/// Extract p x p x B neighborhoods centered at `coords`. Labels come from
/// the center pixels (which must be labeled) and are remapped to dense
/// 0-based ids.
pub fn extract_patches(
    cube: &HyperspectralCube,
    coords: &[(usize, usize)],
    p: usize,
) -> Result<SampleBatch> {
    if p % 2 == 0 || p == 0 {
        return Err(Error::InvalidInput(format!(
            "patch size must be odd, got {p}"
        )));
    }
    let half = (p / 2) as isize;
    let bands = cube.bands;
    let mut data = Vec::with_capacity(coords.len() * p * p * bands);
    let mut labels = Vec::with_capacity(coords.len());
    for &(row, col) in coords {
        if row >= cube.height || col >= cube.width {
            return Err(Error::CoordOutOfBounds {
                row,
                col,
                height: cube.height,
                width: cube.width,
            });
        }
        let label = cube.label_at(row, col);
        if label == 0 {
            return Err(Error::InvalidInput(format!(
                "pixel ({row}, {col}) is unlabeled"
            )));
        }
        labels.push(label as usize - 1);
        for dr in -half..=half {
            let r = mirror_index(row as isize + dr, cube.height);
            for dc in -half..=half {
                let c = mirror_index(col as isize + dc, cube.width);
                data.extend_from_slice(cube.spectrum(r, c));
            }
        }
    }
    SampleBatch::new(
        Tensor::from_vec(vec![coords.len(), p, p, bands], data)?,
        labels,
        coords.to_vec(),
    )
}
