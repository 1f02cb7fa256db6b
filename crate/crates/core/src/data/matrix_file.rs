//! Binary matrix container (`.snpm`).
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 4    | magic `SNPM`                   |
//! | 4      | 4    | u32 version (= 1)              |
//! | 8      | 4    | u32 dtype (0 = f64, 1 = f32)   |
//! | 12     | 4    | u32 ndim (= 2)                 |
//! | 16     | 8    | u64 rows                       |
//! | 24     | 8    | u64 cols                       |
//! | 32     | ...  | row-major payload              |
//!
//! The reader also accepts a 36-byte header carrying four trailing zero bytes
//! after `cols`, detected from the file length.

use std::fs;
use std::path::Path;

use crate::error::{Result, SnpError};
use crate::matrix::Matrix;

pub const MAGIC: [u8; 4] = *b"SNPM";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;
const PADDED_HEADER_LEN: usize = HEADER_LEN + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F64,
    F32,
}

impl Dtype {
    pub fn code(self) -> u32 {
        match self {
            Dtype::F64 => 0,
            Dtype::F32 => 1,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(Dtype::F64),
            1 => Ok(Dtype::F32),
            other => Err(SnpError::Format(format!("unknown dtype code {other}"))),
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F64 => 8,
            Dtype::F32 => 4,
        }
    }
}

pub fn encode_matrix(m: &Matrix, dtype: Dtype) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.data().len() * dtype.size());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dtype.code().to_le_bytes());
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    match dtype {
        Dtype::F64 => m
            .data()
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        Dtype::F32 => m
            .data()
            .iter()
            .for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
    }
    out
}

fn u32_at(bytes: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap())
}

fn u64_at(bytes: &[u8], off: usize) -> u64 {
    u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap())
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(SnpError::Format(format!(
            "bad magic {:?}, expected \"SNPM\"",
            String::from_utf8_lossy(&bytes[..bytes.len().min(4)])
        )));
    }
    if bytes.len() < HEADER_LEN {
        return Err(SnpError::Length(format!(
            "header truncated: {} of {HEADER_LEN} bytes",
            bytes.len()
        )));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(SnpError::Format(format!("unsupported version {version}")));
    }
    let dtype = Dtype::from_code(u32_at(bytes, 8))?;
    let ndim = u32_at(bytes, 12);
    if ndim != 2 {
        return Err(SnpError::Format(format!("ndim must be 2, got {ndim}")));
    }
    let rows = usize::try_from(u64_at(bytes, 16))
        .map_err(|_| SnpError::Format("row count exceeds address space".into()))?;
    let cols = usize::try_from(u64_at(bytes, 24))
        .map_err(|_| SnpError::Format("column count exceeds address space".into()))?;
    let payload_len = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(dtype.size()))
        .ok_or_else(|| SnpError::Format(format!("{rows}x{cols} overflows")))?;

    let header_len = if bytes.len() == PADDED_HEADER_LEN + payload_len
        && bytes[HEADER_LEN..PADDED_HEADER_LEN] == [0; 4]
    {
        PADDED_HEADER_LEN
    } else {
        HEADER_LEN
    };
    let payload = &bytes[header_len..];
    if payload.len() < payload_len {
        return Err(SnpError::Length(format!(
            "payload truncated: {} of {payload_len} bytes for {rows}x{cols}",
            payload.len()
        )));
    }
    if payload.len() > payload_len {
        return Err(SnpError::Length(format!(
            "{} trailing bytes after {rows}x{cols} payload",
            payload.len() - payload_len
        )));
    }

    let data: Vec<f64> = match dtype {
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    let m = Matrix::new(rows, cols, data)?;
    m.ensure_finite()?;
    Ok(m)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| SnpError::io(path, e))?;
    decode_matrix(&bytes).map_err(|e| match e {
        SnpError::Format(msg) => SnpError::Format(format!("{}: {msg}", path.display())),
        SnpError::Length(msg) => SnpError::Length(format!("{}: {msg}", path.display())),
        SnpError::Validation(msg) => SnpError::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_matrix(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    write_matrix_as(m, path, Dtype::F64)
}

pub fn write_matrix_as(m: &Matrix, path: impl AsRef<Path>, dtype: Dtype) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_matrix(m, dtype)).map_err(|e| SnpError::io(path, e))
}
