//! The "HSC1" cube file.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   4 bytes "HSC1"
//! u32     height, width, bands, num_classes
//! names   num_classes x (u32 length + UTF-8 bytes)
//! f64     radiance, band-interleaved by pixel (row-major pixels, B values each)
//! u16     labels, row-major
//! ```

use std::fs;
use std::path::Path;

use crate::data::HyperspectralCube;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const MAGIC: &[u8; 4] = b"HSC1";

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated(what));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn f64(&mut self, what: &'static str) -> Result<f64> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes([
            b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
        ]))
    }
}

pub fn encode_cube(cube: &HyperspectralCube) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [
        cube.height as u32,
        cube.width as u32,
        cube.bands as u32,
        cube.num_classes() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for name in &cube.class_names {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    for &v in cube.radiance.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &label in &cube.labels {
        out.extend_from_slice(&label.to_le_bytes());
    }
    out
}

pub fn decode_cube(bytes: &[u8]) -> Result<HyperspectralCube> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(MAGIC).into_owned(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let height = cur.u32("height")? as usize;
    let width = cur.u32("width")? as usize;
    let bands = cur.u32("bands")? as usize;
    let num_classes = cur.u32("class count")? as usize;
    let mut class_names = Vec::with_capacity(num_classes);
    for _ in 0..num_classes {
        let len = cur.u32("name length")? as usize;
        let raw = cur.take(len, "class name")?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| Error::InvalidInput("class name is not UTF-8".into()))?;
        class_names.push(name.to_owned());
    }
    let numel = height * width * bands;
    let mut radiance = Vec::with_capacity(numel);
    for _ in 0..numel {
        radiance.push(cur.f64("radiance")?);
    }
    let mut labels = Vec::with_capacity(height * width);
    for _ in 0..height * width {
        let label = cur.u16("labels")?;
        if label as u32 > num_classes as u32 {
            return Err(Error::LabelOutOfRange {
                label: label as u32,
                max: num_classes as u32,
            });
        }
        labels.push(label);
    }
    if cur.pos != bytes.len() {
        return Err(Error::InvalidInput(format!(
            "{} trailing bytes after labels",
            bytes.len() - cur.pos
        )));
    }
    HyperspectralCube::new(
        height,
        width,
        bands,
        Tensor::from_vec(vec![height, width, bands], radiance)?,
        labels,
        class_names,
    )
}

pub fn write_cube(path: &Path, cube: &HyperspectralCube) -> Result<()> {
    fs::write(path, encode_cube(cube))?;
    Ok(())
}

pub fn read_cube(path: &Path) -> Result<HyperspectralCube> {
    decode_cube(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;
    use crate::numerics::Rng;

    #[test]
    fn round_trip_is_bitwise() {
        let mut rng = Rng::new(42);
        let cube = generate_synthetic(&mut rng, 9, 7, 5, 3, 2, 2.0, 0.3).unwrap();
        let bytes = encode_cube(&cube);
        let back = decode_cube(&bytes).unwrap();
        assert_eq!(cube, back);
        assert_eq!(bytes, encode_cube(&back));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.hsc");
        let mut rng = Rng::new(1);
        let cube = generate_synthetic(&mut rng, 6, 6, 3, 2, 1, 2.0, 0.1).unwrap();
        write_cube(&path, &cube).unwrap();
        assert_eq!(read_cube(&path).unwrap(), cube);
    }

    #[test]
    fn corrupted_magic_is_reported() {
        let mut rng = Rng::new(2);
        let cube = generate_synthetic(&mut rng, 4, 4, 2, 2, 1, 2.0, 0.0).unwrap();
        let mut bytes = encode_cube(&cube);
        bytes[0] = b'X';
        match decode_cube(&bytes) {
            Err(Error::BadMagic { found, .. }) => assert!(found.starts_with('X')),
            other => panic!("expected bad magic, got {other:?}"),
        }
    }

    #[test]
    fn truncation_is_reported() {
        let mut rng = Rng::new(2);
        let cube = generate_synthetic(&mut rng, 4, 4, 2, 2, 1, 2.0, 0.0).unwrap();
        let bytes = encode_cube(&cube);
        let short = &bytes[..bytes.len() - 3];
        assert!(matches!(decode_cube(short), Err(Error::Truncated(_))));
    }

    #[test]
    fn label_beyond_class_count_is_reported() {
        let mut rng = Rng::new(2);
        let cube = generate_synthetic(&mut rng, 4, 4, 2, 2, 1, 2.0, 0.0).unwrap();
        let mut bytes = encode_cube(&cube);
        let n = bytes.len();
        bytes[n - 2..].copy_from_slice(&99u16.to_le_bytes());
        assert!(matches!(
            decode_cube(&bytes),
            Err(Error::LabelOutOfRange { label: 99, max: 2 })
        ));
    }

    #[test]
    fn hand_assembled_fixture_decodes_to_known_values() {
        // 2x2x3 cube, one class named "ab", radiance 0.5, 1.5, ... 11.5,
        // labels 1,0,1,1
        let mut bytes: Vec<u8> = Vec::new();
        bytes.extend_from_slice(b"HSC1");
        bytes.extend_from_slice(&2u32.to_le_bytes()); // height
        bytes.extend_from_slice(&2u32.to_le_bytes()); // width
        bytes.extend_from_slice(&3u32.to_le_bytes()); // bands
        bytes.extend_from_slice(&1u32.to_le_bytes()); // classes
        bytes.extend_from_slice(&2u32.to_le_bytes()); // name length
        bytes.extend_from_slice(b"ab");
        for i in 0..12 {
            bytes.extend_from_slice(&(i as f64 + 0.5).to_le_bytes());
        }
        for label in [1u16, 0, 1, 1] {
            bytes.extend_from_slice(&label.to_le_bytes());
        }
        let cube = decode_cube(&bytes).unwrap();
        assert_eq!((cube.height, cube.width, cube.bands), (2, 2, 3));
        assert_eq!(cube.class_names, vec!["ab".to_string()]);
        assert_eq!(cube.spectrum(0, 0), &[0.5, 1.5, 2.5]);
        assert_eq!(cube.spectrum(1, 1), &[9.5, 10.5, 11.5]);
        assert_eq!(cube.labels, vec![1, 0, 1, 1]);
    }
}
