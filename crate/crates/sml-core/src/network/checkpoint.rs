//! The "SMLN" model checkpoint file.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   4 bytes "SMLN"
//! u16     format version (1)
//! u32     input height, width, channels
//! u32     class count
//! u32     layer count
//! layers  u8 kind tag, then per kind:
//!           0 conv2d: u32 out_channels, kernel_h, kernel_w
//!           1 relu, 2 flatten: nothing
//!           3 dense: u32 out_features
//! f64     weight arrays in layer order (conv: kernel then bias,
//!         dense: weight then bias), then head weight and bias
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{
    shape_chain, ActShape, ConvParams, DenseParams, LayerParams, LayerSpec, NetworkState,
};
use crate::numerics::Tensor;

const MAGIC: &[u8; 4] = b"SMLN";
const VERSION: u16 = 1;

pub fn encode_checkpoint(net: &NetworkState) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let [h, w, c] = net.input_shape();
    for v in [
        h as u32,
        w as u32,
        c as u32,
        net.num_classes() as u32,
        net.specs().len() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for spec in net.specs() {
        match *spec {
            LayerSpec::Conv2d {
                out_channels,
                kernel_h,
                kernel_w,
            } => {
                out.push(0);
                for v in [out_channels as u32, kernel_h as u32, kernel_w as u32] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            LayerSpec::Relu => out.push(1),
            LayerSpec::Flatten => out.push(2),
            LayerSpec::Dense { out_features } => {
                out.push(3);
                out.extend_from_slice(&(out_features as u32).to_le_bytes());
            }
        }
    }
    for tensor in net.weight_tensors() {
        for &v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

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

    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64_array(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>> {
        let raw = self.take(8 * n, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]))
            .collect())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<NetworkState> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(MAGIC).into_owned(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let version = cur.u16("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let h = cur.u32("input height")? as usize;
    let w = cur.u32("input width")? as usize;
    let c = cur.u32("input channels")? as usize;
    let num_classes = cur.u32("class count")? as usize;
    let num_layers = cur.u32("layer count")? as usize;
    let mut specs = Vec::with_capacity(num_layers);
    for _ in 0..num_layers {
        let spec = match cur.u8("layer kind")? {
            0 => LayerSpec::Conv2d {
                out_channels: cur.u32("conv channels")? as usize,
                kernel_h: cur.u32("kernel height")? as usize,
                kernel_w: cur.u32("kernel width")? as usize,
            },
            1 => LayerSpec::Relu,
            2 => LayerSpec::Flatten,
            3 => LayerSpec::Dense {
                out_features: cur.u32("dense features")? as usize,
            },
            other => {
                return Err(Error::InvalidInput(format!("unknown layer kind tag {other}")))
            }
        };
        specs.push(spec);
    }
    let shapes = shape_chain(&specs, [h, w, c])?;
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
                let kernel = cur.f64_array(out_channels * kernel_h * kernel_w * in_c, "kernel")?;
                let bias = cur.f64_array(out_channels, "conv bias")?;
                Some(LayerParams::Conv(ConvParams {
                    kernel: Tensor::from_vec(
                        vec![out_channels, kernel_h, kernel_w, in_c],
                        kernel,
                    )?,
                    bias: Tensor::from_vec(vec![out_channels], bias)?,
                }))
            }
            LayerSpec::Dense { out_features } => {
                let fan_in = shapes[i].numel();
                let weight = cur.f64_array(fan_in * out_features, "dense weight")?;
                let bias = cur.f64_array(out_features, "dense bias")?;
                Some(LayerParams::Dense(DenseParams {
                    weight: Tensor::from_vec(vec![fan_in, out_features], weight)?,
                    bias: Tensor::from_vec(vec![out_features], bias)?,
                }))
            }
            LayerSpec::Relu | LayerSpec::Flatten => None,
        };
        params.push(layer);
    }
    let embedding = shapes.last().expect("non-empty").numel();
    let head_weight = cur.f64_array(embedding * num_classes, "head weight")?;
    let head_bias = cur.f64_array(num_classes, "head bias")?;
    if cur.pos != bytes.len() {
        return Err(Error::InvalidInput(format!(
            "{} trailing bytes after weights",
            bytes.len() - cur.pos
        )));
    }
    NetworkState::from_parts(
        specs,
        [h, w, c],
        num_classes,
        shapes,
        params,
        DenseParams {
            weight: Tensor::from_vec(vec![embedding, num_classes], head_weight)?,
            bias: Tensor::from_vec(vec![num_classes], head_bias)?,
        },
    )
}

pub fn write_checkpoint(path: &Path, net: &NetworkState) -> Result<()> {
    fs::write(path, encode_checkpoint(net))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<NetworkState> {
    decode_checkpoint(&fs::read(path)?)
}
