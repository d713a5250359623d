//! Synthetic labeled cube generation.
//!
//! Labels come from a seeded Voronoi partition (`region_scale` sites per
//! class, distinct positions, round-robin class assignment), so every class
//! forms contiguous regions. Each class gets a smooth mean spectrum built
//! from Gaussian bumps over the band axis; the spectra are recentered and
//! scaled so that the average pairwise distance between class means equals
//! `spectral_sep * noise_std`. Pixel radiance is the class mean plus a
//! spatially 3x3-box-smoothed Gaussian noise field, which leaves class
//! means exact when `noise_std` is zero and gives neighboring pixels
//! correlated noise otherwise.

use crate::data::patches::mirror_index;
use crate::data::HyperspectralCube;
use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

#[allow(clippy::too_many_arguments)]
pub fn generate_synthetic(
    rng: &mut Rng,
    height: usize,
    width: usize,
    bands: usize,
    num_classes: usize,
    region_scale: usize,
    spectral_sep: f64,
    noise_std: f64,
) -> Result<HyperspectralCube> {
    if height == 0 || width == 0 || bands == 0 {
        return Err(Error::InvalidInput(format!(
            "cube dims must be positive, got {height}x{width}x{bands}"
        )));
    }
    if num_classes < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    if region_scale == 0 {
        return Err(Error::NonPositive {
            what: "region_scale",
            got: 0.0,
        });
    }
    if noise_std < 0.0 {
        return Err(Error::NegativeStd(noise_std));
    }
    let num_sites = num_classes * region_scale;
    if num_sites > height * width {
        return Err(Error::InvalidInput(format!(
            "{num_sites} Voronoi sites do not fit a {height}x{width} cube"
        )));
    }

    // Distinct site positions; site s belongs to class s % num_classes, so
    // every class owns at least one site and therefore at least one pixel.
    let mut used = std::collections::HashSet::new();
    let mut sites: Vec<(usize, usize)> = Vec::with_capacity(num_sites);
    while sites.len() < num_sites {
        let pos = (
            rng.below(height as u64) as usize,
            rng.below(width as u64) as usize,
        );
        if used.insert(pos) {
            sites.push(pos);
        }
    }

    let mut labels = vec![0u16; height * width];
    for row in 0..height {
        for col in 0..width {
            let mut best = usize::MAX;
            let mut best_dist = u64::MAX;
            for (s, &(sr, sc)) in sites.iter().enumerate() {
                let dr = sr.abs_diff(row) as u64;
                let dc = sc.abs_diff(col) as u64;
                let dist = dr * dr + dc * dc;
                if dist < best_dist {
                    best_dist = dist;
                    best = s;
                }
            }
            labels[row * width + col] = (best % num_classes) as u16 + 1;
        }
    }

    // Smooth mean spectrum per class: baseline plus three Gaussian bumps.
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(num_classes);
    for _ in 0..num_classes {
        let mut spectrum = vec![1.0; bands];
        for _ in 0..3 {
            let amp = 0.25 + 0.75 * rng.next_f64();
            let center = rng.next_f64() * (bands.max(2) - 1) as f64;
            let sigma = bands as f64 * (0.125 + 0.2 * rng.next_f64());
            for (b, v) in spectrum.iter_mut().enumerate() {
                let z = (b as f64 - center) / sigma;
                *v += amp * (-0.5 * z * z).exp();
            }
        }
        means.push(spectrum);
    }

    // Rescale deviations from the grand mean so that the average pairwise
    // distance between class means is spectral_sep * noise_std. With zero
    // noise the ratio is infinite regardless, so the raw spectra stand.
    if noise_std > 0.0 && spectral_sep > 0.0 {
        let mut grand = vec![0.0; bands];
        for mean in &means {
            for (g, &m) in grand.iter_mut().zip(mean) {
                *g += m / num_classes as f64;
            }
        }
        let mut total = 0.0;
        let mut pairs = 0usize;
        for i in 0..num_classes {
            for j in (i + 1)..num_classes {
                let dist: f64 = means[i]
                    .iter()
                    .zip(&means[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                total += dist;
                pairs += 1;
            }
        }
        let avg = total / pairs as f64;
        if avg > 0.0 {
            let scale = spectral_sep * noise_std / avg;
            for mean in &mut means {
                for (m, &g) in mean.iter_mut().zip(&grand) {
                    *m = g + scale * (*m - g);
                }
            }
        }
    }

    let mut radiance = vec![0.0; height * width * bands];
    for row in 0..height {
        for col in 0..width {
            let class = labels[row * width + col] as usize - 1;
            let start = (row * width + col) * bands;
            radiance[start..start + bands].copy_from_slice(&means[class]);
        }
    }

    if noise_std > 0.0 {
        let noise: Vec<f64> = (0..height * width * bands)
            .map(|_| rng.normal(0.0, noise_std))
            .collect();
        for row in 0..height {
            for col in 0..width {
                let start = (row * width + col) * bands;
                for b in 0..bands {
                    let mut acc = 0.0;
                    for dr in -1i64..=1 {
                        let r = mirror_index(row as isize + dr as isize, height);
                        for dc in -1i64..=1 {
                            let c = mirror_index(col as isize + dc as isize, width);
                            acc += noise[(r * width + c) * bands + b];
                        }
                    }
                    radiance[start + b] += acc / 9.0;
                }
            }
        }
    }

    HyperspectralCube::new(
        height,
        width,
        bands,
        Tensor::from_vec(vec![height, width, bands], radiance)?,
        labels,
        (0..num_classes).map(|c| format!("class-{}", c + 1)).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_gives_exact_class_spectra() {
        let mut rng = Rng::new(10);
        let cube = generate_synthetic(&mut rng, 12, 12, 6, 3, 2, 5.0, 0.0).unwrap();
        // collect one reference spectrum per class, then check all pixels
        let mut reference: Vec<Option<Vec<f64>>> = vec![None; 3];
        for (r, c) in cube.labeled_coords() {
            let class = cube.label_at(r, c) as usize - 1;
            let spectrum = cube.spectrum(r, c).to_vec();
            match &reference[class] {
                None => reference[class] = Some(spectrum),
                Some(existing) => assert_eq!(existing, &spectrum, "pixel ({r},{c})"),
            }
        }
        assert!(reference.iter().all(|r| r.is_some()));
    }

    #[test]
    fn every_class_has_pixels() {
        for seed in 0..5 {
            let mut rng = Rng::new(seed);
            let cube = generate_synthetic(&mut rng, 16, 16, 4, 4, 3, 2.0, 0.1).unwrap();
            for class in 1..=4u16 {
                assert!(
                    cube.labels.iter().any(|&l| l == class),
                    "class {class} empty at seed {seed}"
                );
            }
        }
    }

    #[test]
    fn high_separation_is_nearest_mean_classifiable() {
        let mut rng = Rng::new(123);
        let cube = generate_synthetic(&mut rng, 24, 24, 8, 3, 2, 10.0, 0.2).unwrap();
        // estimate class means from the data itself (oracle classifier)
        let mut sums = vec![vec![0.0; 8]; 3];
        let mut counts = vec![0usize; 3];
        for (r, c) in cube.labeled_coords() {
            let class = cube.label_at(r, c) as usize - 1;
            for (s, &v) in sums[class].iter_mut().zip(cube.spectrum(r, c)) {
                *s += v;
            }
            counts[class] += 1;
        }
        for (sum, &n) in sums.iter_mut().zip(&counts) {
            for v in sum.iter_mut() {
                *v /= n as f64;
            }
        }
        let mut correct = 0usize;
        let mut total = 0usize;
        for (r, c) in cube.labeled_coords() {
            let spectrum = cube.spectrum(r, c);
            let mut best = 0usize;
            let mut best_dist = f64::INFINITY;
            for (k, mean) in sums.iter().enumerate() {
                let dist: f64 = spectrum
                    .iter()
                    .zip(mean)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if dist < best_dist {
                    best_dist = dist;
                    best = k;
                }
            }
            if best == cube.label_at(r, c) as usize - 1 {
                correct += 1;
            }
            total += 1;
        }
        let accuracy = correct as f64 / total as f64;
        assert!(accuracy >= 0.99, "nearest-mean accuracy {accuracy}");
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_synthetic(&mut Rng::new(7), 10, 10, 5, 3, 2, 3.0, 0.5).unwrap();
        let b = generate_synthetic(&mut Rng::new(7), 10, 10, 5, 3, 2, 3.0, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_dims_rejected() {
        assert!(generate_synthetic(&mut Rng::new(0), 0, 4, 4, 2, 1, 1.0, 0.1).is_err());
        assert!(generate_synthetic(&mut Rng::new(0), 4, 4, 4, 1, 1, 1.0, 0.1).is_err());
        assert!(generate_synthetic(&mut Rng::new(0), 2, 2, 4, 3, 2, 1.0, 0.1).is_err());
    }
}
