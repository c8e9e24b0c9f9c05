//! Field export.
//!
//! Binary layout, all little-endian:
//! `b"TORUSFLD"`, u32 format version, u32 dimension, u32 components,
//! u32 resolution, then `components · N^d` f64 values, component-major and
//! row-major within a component (axis 0 slowest).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::GridField;

pub const MAGIC: &[u8; 8] = b"TORUSFLD";
pub const FORMAT_VERSION: u32 = 1;

/// Largest resolution accepted by the CSV writer.
pub const CSV_MAX_RESOLUTION: usize = 64;

pub fn encode_field(field: &GridField) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * field.real().len());
    out.extend_from_slice(MAGIC);
    for word in [
        FORMAT_VERSION,
        field.dimension() as u32,
        field.components() as u32,
        field.resolution() as u32,
    ] {
        out.extend_from_slice(&word.to_le_bytes());
    }
    for x in field.real() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<GridField> {
    if bytes.len() < 24 || &bytes[..8] != MAGIC {
        return Err(Error::Input("not a torus field file".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap());
    if word(0) != FORMAT_VERSION {
        return Err(Error::Input(format!("unsupported field format version {}", word(0))));
    }
    let (dim, comps, n) = (word(1) as usize, word(2) as usize, word(3) as usize);
    let body = &bytes[24..];
    let expected = comps * n.pow(dim as u32) * 8;
    if body.len() != expected {
        return Err(Error::Input(format!(
            "field body has {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let real = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GridField::from_real(dim, n, comps, real)
}

pub fn write_field_binary(path: impl AsRef<Path>, field: &GridField) -> Result<()> {
    fs::write(&path, encode_field(field)).map_err(|e| Error::io(&path, e))
}

pub fn read_field_binary(path: impl AsRef<Path>) -> Result<GridField> {
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    decode_field(&bytes)
}

/// One row per grid point: coordinates x1..xd then the components.
pub fn field_to_csv(field: &GridField) -> Result<String> {
    if field.resolution() > CSV_MAX_RESOLUTION {
        return Err(Error::Input(format!(
            "CSV export is limited to N ≤ {CSV_MAX_RESOLUTION}, got {}",
            field.resolution()
        )));
    }
    let dim = field.dimension();
    let comps = field.components();
    let lat = field.lattice();
    let mut s = String::new();
    let mut header: Vec<String> = (1..=dim).map(|a| format!("x{a}")).collect();
    if comps == 1 {
        header.push("value".into());
    } else {
        header.extend((1..=comps).map(|c| format!("c{c}")));
    }
    s.push_str(&header.join(","));
    s.push('\n');
    for flat in 0..lat.len() {
        let x = lat.point(flat);
        for (a, xa) in x.iter().take(dim).enumerate() {
            if a > 0 {
                s.push(',');
            }
            write!(s, "{xa}").unwrap();
        }
        for c in 0..comps {
            write!(s, ",{}", field.real_component(c)[flat]).unwrap();
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn write_field_csv(path: impl AsRef<Path>, field: &GridField) -> Result<()> {
    let text = field_to_csv(field)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
