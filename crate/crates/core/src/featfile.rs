//! Binary feature and statistics files.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic    4 bytes   "FEAT" (features) or "STAT" (normalization stats)
//! version  u16       1
//! rows     u32       frame count; always 2 for stats (mean row, std row)
//! dim      u32       123
//! values   rows*dim  f32, row-major
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::features::{FeatureMatrix, NormStats, FEATURE_DIM};
use crate::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"FEAT";
pub const STATS_MAGIC: &[u8; 4] = b"STAT";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 14;

fn encode(magic: &[u8; 4], rows: usize, values: impl Iterator<Item = f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + rows * FEATURE_DIM * 4);
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(FEATURE_DIM as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn decode(magic: &[u8; 4], bytes: &[u8]) -> Result<(usize, Vec<f64>)> {
    let what = if magic == FEATURE_MAGIC { "feature file" } else { "stats file" };
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(what, "truncated header"));
    }
    if &bytes[0..4] != magic {
        return Err(Error::format(what, format!("bad magic {:?}", &bytes[0..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::format(what, format!("unsupported version {version}")));
    }
    let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    if dim != FEATURE_DIM {
        return Err(Error::Dimension {
            expected: FEATURE_DIM,
            got: dim,
        });
    }
    let body = &bytes[HEADER_LEN..];
    if body.len() != rows * dim * 4 {
        return Err(Error::format(
            what,
            format!("expected {} value bytes, found {}", rows * dim * 4, body.len()),
        ));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((rows, values))
}

pub fn encode_features(f: &FeatureMatrix) -> Vec<u8> {
    encode(FEATURE_MAGIC, f.frames(), f.values().iter().copied())
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureMatrix> {
    let (rows, values) = decode(FEATURE_MAGIC, bytes)?;
    FeatureMatrix::new(rows, values)
}

pub fn encode_stats(s: &NormStats) -> Vec<u8> {
    encode(STATS_MAGIC, 2, s.mean.iter().chain(&s.std).copied())
}

pub fn decode_stats(bytes: &[u8]) -> Result<NormStats> {
    let (rows, values) = decode(STATS_MAGIC, bytes)?;
    if rows != 2 {
        return Err(Error::format("stats file", format!("expected 2 rows, found {rows}")));
    }
    let (mean, std) = values.split_at(FEATURE_DIM);
    let stats = NormStats {
        mean: mean.to_vec(),
        std: std.to_vec(),
        sample_count: 0,
    };
    stats.validate()?;
    Ok(stats)
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::file(path, e))?;
    Ok(bytes)
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| Error::file(path, e))
}

pub fn write_features(path: impl AsRef<Path>, f: &FeatureMatrix) -> Result<()> {
    write_all(path.as_ref(), &encode_features(f))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    decode_features(&read_all(path.as_ref())?)
}

pub fn write_stats(path: impl AsRef<Path>, s: &NormStats) -> Result<()> {
    write_all(path.as_ref(), &encode_stats(s))
}

pub fn read_stats(path: impl AsRef<Path>) -> Result<NormStats> {
    decode_stats(&read_all(path.as_ref())?)
}
