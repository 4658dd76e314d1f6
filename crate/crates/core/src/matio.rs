//! `ZSLM` binary matrix container and small file helpers.
//!
//! Layout (little-endian, no padding):
//!
//! ```text
//! b"ZSLM" | u32 version (=1) | u8 dtype (0 = f32, 1 = f64) | u64 rows | u64 cols | rows*cols values
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const MAGIC: &[u8; 4] = b"ZSLM";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 1 + 8 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

pub fn encode(m: &DenseMatrix, dtype: Dtype) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.data().len() * dtype.width());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(dtype.code());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for &v in m.data() {
        match dtype {
            Dtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Dtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    out
}

/// Decodes a container; `origin` only labels errors.
pub fn decode(bytes: &[u8], origin: &Path) -> Result<(DenseMatrix, Dtype)> {
    let fail = |msg: String| Error::Format {
        path: origin.to_path_buf(),
        msg,
    };
    if bytes.len() < HEADER_LEN {
        return Err(fail(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(fail("missing ZSLM magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(fail(format!("unsupported version {version}")));
    }
    let dtype = match bytes[8] {
        0 => Dtype::F32,
        1 => Dtype::F64,
        other => return Err(fail(format!("unknown dtype code {other}"))),
    };
    let rows = u64::from_le_bytes(bytes[9..17].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[17..25].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(dtype.width()))
        .ok_or_else(|| fail("dimension overflow".into()))?;
    if payload.len() != expected {
        return Err(fail(format!(
            "payload is {} bytes, expected {expected} for {rows}x{cols}",
            payload.len()
        )));
    }
    let data: Vec<f64> = match dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    let m = DenseMatrix::from_vec(rows, cols, data).map_err(|e| fail(e.to_string()))?;
    Ok((m, dtype))
}

pub fn write_matrix(path: &Path, m: &DenseMatrix, dtype: Dtype) -> Result<()> {
    write_atomic(path, &encode(m, dtype))
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path).map(|(m, _)| m)
}

/// Writes to a sibling temp file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}
