//! Whole-cube and coordinate-set classification with a frozen network.

use crate::data::{extract_patches, HyperspectralCube};
use crate::error::{Error, Result};
use crate::network::{forward, NetworkState};
use crate::parallel::maybe_par_map_indices;

fn argmax_lowest_tie(row: &[f64]) -> usize {
    let mut best = 0usize;
    for (c, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = c;
        }
    }
    best
}

/// Predict the class (1-based cube label) at each coordinate. Pixels are
/// evaluated independently, so the map may run in parallel; ties break
/// toward the lower class id.
pub fn predict_coords(
    net: &NetworkState,
    cube: &HyperspectralCube,
    coords: &[(usize, usize)],
    patch_size: usize,
) -> Result<Vec<u16>> {
    if cube.bands != net.input_shape()[2] {
        return Err(Error::BandMismatch {
            cube: cube.bands,
            expected: net.input_shape()[2],
        });
    }
    if patch_size != net.input_shape()[0] {
        return Err(Error::ShapeMismatch {
            left: vec![patch_size, patch_size, cube.bands],
            right: net.input_shape().to_vec(),
        });
    }
    let results = maybe_par_map_indices(coords.len(), |i| -> Result<u16> {
        let batch = extract_patches(cube, &coords[i..=i], patch_size)?;
        let (_, logits, _) = forward(net, &batch)?;
        Ok(argmax_lowest_tie(logits.row(0)) as u16 + 1)
    });
    results.into_iter().collect()
}

/// Per-pixel argmax prediction over all labeled pixels; unlabeled pixels
/// stay 0 in the returned H*W row-major map.
pub fn classify_cube(
    net: &NetworkState,
    cube: &HyperspectralCube,
    patch_size: usize,
) -> Result<Vec<u16>> {
    let coords = cube.labeled_coords();
    let predictions = predict_coords(net, cube, &coords, patch_size)?;
    let mut map = vec![0u16; cube.height * cube.width];
    for (&(row, col), &pred) in coords.iter().zip(&predictions) {
        map[row * cube.width + col] = pred;
    }
    Ok(map)
}
