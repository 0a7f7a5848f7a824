//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic  "GPRB"        4 bytes
//! version u32
//! kind    u8           0 init, 1 pre, 2 par, 3 merge
//! V m h D u32 x 4
//! tensors f64 ...      in ModelParams::tensors order, row-major
//! ```

use std::fs;
use std::path::Path;

use super::params::TENSOR_NAMES;
use super::{ArchitectureKind, ModelDims, ModelParams};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"GPRB";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 1 + 16;

pub fn encode_params(params: &ModelParams) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * params.num_parameters());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(params.kind.code());
    let d = &params.dims;
    for v in [d.vocab, d.embed, d.hidden, d.image] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for t in params.tensors() {
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn decode_params(bytes: &[u8]) -> Result<ModelParams> {
    let bad = |msg: String| Error::Checkpoint(msg);
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("file too short for header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != FORMAT_VERSION {
        return Err(bad(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let kind = ArchitectureKind::from_code(bytes[8])
        .ok_or_else(|| bad(format!("unknown architecture code {}", bytes[8])))?;
    let dims = ModelDims {
        vocab: u32_at(9) as usize,
        embed: u32_at(13) as usize,
        hidden: u32_at(17) as usize,
        image: u32_at(21) as usize,
    };
    dims.validate().map_err(|e| bad(e.to_string()))?;
    let shapes = ModelParams::shapes(kind, &dims);
    let total: u128 = shapes
        .iter()
        .map(|s| s.iter().map(|&d| d as u128).product::<u128>())
        .sum();
    let expected = HEADER_LEN as u128 + 8 * total;
    if bytes.len() as u128 != expected {
        return Err(bad(format!(
            "declared dimensions {dims:?} need {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let mut offset = HEADER_LEN;
    let mut tensors = Vec::with_capacity(shapes.len());
    for (shape, name) in shapes.into_iter().zip(TENSOR_NAMES) {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = bytes[offset..offset + 8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        offset += 8 * n;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(bad(format!("{name} contains non-finite values")));
        }
        tensors.push(Tensor::new(shape, data)?);
    }
    Ok(ModelParams::from_tensors(kind, dims, tensors))
}

pub fn save_params(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_params(params))?;
    Ok(())
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ModelParams> {
    decode_params(&fs::read(path)?)
}
