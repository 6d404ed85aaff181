//! Binary checkpoint: `PEMC`, version u16, input/hidden/output u32, seed u64,
//! epoch u32, then every parameter as `f32`, all little-endian.

use std::fs;
use std::path::Path;

use super::model::{ModelDims, ToyModel};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PEMC";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 3 * 4 + 8 + 4;

pub fn encode_checkpoint(model: &ToyModel, epoch: u32) -> Vec<u8> {
    let d = model.dims;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * model.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [d.input, d.hidden, d.output] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&model.seed.to_le_bytes());
    out.extend_from_slice(&epoch.to_le_bytes());
    for p in &model.params {
        out.extend_from_slice(&(*p as f32).to_le_bytes());
    }
    out
}

/// Returns the model (parameters widened from `f32`) and the stored epoch.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ToyModel, u32)> {
    let bad = |d: String| Error::format("checkpoint", d);
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(bad("missing PEMC header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let dims = ModelDims {
        input: u32_at(6) as usize,
        hidden: u32_at(10) as usize,
        output: u32_at(14) as usize,
    };
    let seed = u64::from_le_bytes(bytes[18..26].try_into().unwrap());
    let epoch = u32_at(26);
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * dims.param_count() {
        return Err(bad(format!(
            "expected {} parameters, found {} bytes",
            dims.param_count(),
            body.len()
        )));
    }
    let params = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((ToyModel { dims, seed, params }, epoch))
}

pub fn write_checkpoint(path: impl AsRef<Path>, model: &ToyModel, epoch: u32) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(model, epoch)).map_err(|e| Error::file(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(ToyModel, u32)> {
    let path = path.as_ref();
    decode_checkpoint(&fs::read(path).map_err(|e| Error::file(path, e))?)
}
