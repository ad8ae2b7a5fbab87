//! QPF1 field container.
//!
//! Layout (little-endian): magic `QPF1`, u32 width, u32 height, f64 pitch in
//! micrometers, then width*height f64 values in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{QpiError, Result};
use crate::field::{Grid, ScalarField2D};

pub const MAGIC: &[u8; 4] = b"QPF1";
const HEADER: usize = 4 + 4 + 4 + 8;

pub fn encode(field: &ScalarField2D) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 8 * field.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(field.width() as u32).to_le_bytes());
    out.extend_from_slice(&(field.height() as u32).to_le_bytes());
    out.extend_from_slice(&field.pitch().to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ScalarField2D> {
    if bytes.len() < HEADER || &bytes[..4] != MAGIC {
        return Err(QpiError::Format("missing QPF1 header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (w, h) = (u32_at(4), u32_at(8));
    let pitch = f64_at(12);
    let n = w
        .checked_mul(h)
        .ok_or_else(|| QpiError::Format("dimensions overflow".into()))?;
    if bytes.len() != HEADER + 8 * n {
        return Err(QpiError::Format(format!(
            "payload is {} bytes, expected {}",
            bytes.len() - HEADER,
            8 * n
        )));
    }
    let values = (0..n).map(|i| f64_at(HEADER + 8 * i)).collect();
    ScalarField2D::new(Grid::new(w, h, pitch)?, values)
}

pub fn write(path: impl AsRef<Path>, field: &ScalarField2D) -> Result<()> {
    fs::write(path, encode(field))?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<ScalarField2D> {
    decode(&fs::read(path)?)
}
