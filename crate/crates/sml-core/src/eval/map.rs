//! Classification maps as binary portable pixmaps (P6).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Fixed palette: index 0 (unlabeled) is black, classes get distinct hues
/// spaced evenly around the color wheel. Deterministic for a given count.
pub fn default_palette(num_classes: usize) -> Vec<(u8, u8, u8)> {
    let mut palette = vec![(0u8, 0u8, 0u8)];
    for k in 0..num_classes {
        let hue = 360.0 * k as f64 / num_classes as f64;
        let sector = (hue / 60.0) as usize % 6;
        let f = hue / 60.0 - (hue / 60.0).floor();
        let (v, p, q, t) = (255.0, 64.0, 255.0 - (255.0 - 64.0) * f, 64.0 + (255.0 - 64.0) * f);
        let (r, g, b) = match sector {
            0 => (v, t, p),
            1 => (q, v, p),
            2 => (p, v, t),
            3 => (p, q, v),
            4 => (t, p, v),
            _ => (v, p, q),
        };
        palette.push((r as u8, g as u8, b as u8));
    }
    palette
}

/// Encode a label map as P6 bytes using `palette[label]` per pixel.
pub fn render_map(
    map: &[u16],
    height: usize,
    width: usize,
    palette: &[(u8, u8, u8)],
) -> Result<Vec<u8>> {
    if map.len() != height * width {
        return Err(Error::InvalidInput(format!(
            "{} labels for {height}x{width} map",
            map.len()
        )));
    }
    let max_label = map.iter().copied().max().unwrap_or(0) as usize;
    if palette.len() < max_label + 1 {
        return Err(Error::PaletteTooSmall {
            have: palette.len(),
            need: max_label + 1,
        });
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(3 * map.len());
    for &label in map {
        let (r, g, b) = palette[label as usize];
        out.extend_from_slice(&[r, g, b]);
    }
    Ok(out)
}

pub fn write_map(
    path: &Path,
    map: &[u16],
    height: usize,
    width: usize,
    palette: &[(u8, u8, u8)],
) -> Result<()> {
    fs::write(path, render_map(map, height, width, palette)?)?;
    Ok(())
}

/// Decode a P6 pixmap back to labels via exact palette lookup; the test
/// oracle for [`render_map`].
pub fn parse_map(bytes: &[u8], palette: &[(u8, u8, u8)]) -> Result<(Vec<u16>, usize, usize)> {
    let header_end = bytes
        .windows(1)
        .enumerate()
        .filter(|(_, w)| w[0] == b'\n')
        .map(|(i, _)| i)
        .nth(2)
        .ok_or(Error::Truncated("pixmap header"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::InvalidInput("pixmap header is not UTF-8".into()))?;
    let mut lines = header.lines();
    if lines.next() != Some("P6") {
        return Err(Error::BadMagic {
            expected: "P6".into(),
            found: header.lines().next().unwrap_or("").into(),
        });
    }
    let dims = lines
        .next()
        .ok_or(Error::Truncated("pixmap dimensions"))?;
    let mut parts = dims.split_whitespace();
    let width: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::InvalidInput("bad pixmap width".into()))?;
    let height: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::InvalidInput("bad pixmap height".into()))?;
    if lines.next() != Some("255") {
        return Err(Error::InvalidInput("pixmap max value must be 255".into()));
    }
    let pixels = &bytes[header_end + 1..];
    if pixels.len() != 3 * width * height {
        return Err(Error::Truncated("pixmap pixels"));
    }
    let mut map = Vec::with_capacity(width * height);
    for rgb in pixels.chunks_exact(3) {
        let color = (rgb[0], rgb[1], rgb[2]);
        let label = palette
            .iter()
            .position(|&c| c == color)
            .ok_or_else(|| Error::InvalidInput(format!("color {color:?} not in palette")))?;
        map.push(label as u16);
    }
    Ok((map, height, width))
}
