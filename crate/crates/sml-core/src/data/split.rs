//! Stratified train/test splits and the split CSV files.

use std::fs;
use std::path::Path;

use crate::data::HyperspectralCube;
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Split parameters: a fixed number of training pixels drawn per class.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub per_class_train: usize,
    pub seed: u64,
}

/// Draw exactly `per_class_train` training pixels per class, the remainder
/// becoming test pixels. Every class must have strictly more labeled pixels
/// than `per_class_train`. Deterministic in the seed; classes are processed
/// in ascending id order with one shared generator.
pub fn stratified_split(
    cube: &HyperspectralCube,
    spec: &SplitSpec,
) -> Result<(Vec<(usize, usize)>, Vec<(usize, usize)>)> {
    if spec.per_class_train == 0 {
        return Err(Error::NonPositive {
            what: "per_class_train",
            got: 0.0,
        });
    }
    let mut rng = Rng::new(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 1..=cube.num_classes() as u16 {
        let mut coords: Vec<(usize, usize)> = Vec::new();
        for row in 0..cube.height {
            for col in 0..cube.width {
                if cube.label_at(row, col) == class {
                    coords.push((row, col));
                }
            }
        }
        if coords.len() <= spec.per_class_train {
            return Err(Error::InsufficientClass {
                class: class as usize,
                available: coords.len(),
                requested: spec.per_class_train,
            });
        }
        rng.shuffle(&mut coords);
        test.extend_from_slice(&coords[spec.per_class_train..]);
        coords.truncate(spec.per_class_train);
        train.extend_from_slice(&coords);
    }
    Ok((train, test))
}

/// Write coordinates as `row,col,class` CSV with a header line.
pub fn write_split_csv(
    path: &Path,
    cube: &HyperspectralCube,
    coords: &[(usize, usize)],
) -> Result<()> {
    let mut out = String::from("row,col,class\n");
    for &(row, col) in coords {
        let class = cube.label_at(row, col);
        out.push_str(&format!("{row},{col},{class}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a split CSV back into coordinates.
pub fn read_split_csv(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("row,col,class") => {}
        other => {
            return Err(Error::InvalidInput(format!(
                "split CSV must start with 'row,col,class', got {other:?}"
            )))
        }
    }
    let mut coords = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let row = fields
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::InvalidInput(format!("bad row on line {}", idx + 2)))?;
        let col = fields
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::InvalidInput(format!("bad col on line {}", idx + 2)))?;
        coords.push((row, col));
    }
    Ok(coords)
}
