//! Scattering-matrix files.
//!
//! The native container is little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `CMBSCATR` |
//! | 4 | format version (`u32`, currently 1) |
//! | 4 | mode count (`u32`, odd) |
//! | 8 | mode spacing, rad/s (`f64`) |
//! | 8 | grid center, rad/s (`f64`) |
//! | 16 | basis tag, NUL padded (`interleaved`) |
//! | 1 | normalization flag (0 raw, 1 pump-off relative) |
//! | 7 | zero padding |
//! | 16·(2n)² | `(re, im)` pairs, row-major |
//!
//! The generic form is a CSV of `a+bi` cells with a JSON sidecar holding
//! the grid, basis and normalization flag.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::model::ModeGrid;
use crate::scattering::{Normalization, ScatteringMatrix};
use crate::{Complex, Error, Result};

pub const MAGIC: &[u8; 8] = b"CMBSCATR";
pub const FORMAT_VERSION: u32 = 1;
pub const BASIS_TAG: &str = "interleaved";
const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 8 + 16 + 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataFormat {
    Native,
    GenericCsv { sidecar: PathBuf },
}

fn flag(n: Normalization) -> u8 {
    match n {
        Normalization::Raw => 0,
        Normalization::PumpOffRelative => 1,
    }
}

pub fn encode_native(s: &ScatteringMatrix) -> Vec<u8> {
    let grid = s.grid();
    let dim = s.dimension();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * dim * dim);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.mode_count() as u32).to_le_bytes());
    out.extend_from_slice(&grid.spacing().to_le_bytes());
    out.extend_from_slice(&grid.center_frequency().to_le_bytes());
    let mut tag = [0u8; 16];
    tag[..BASIS_TAG.len()].copy_from_slice(BASIS_TAG.as_bytes());
    out.extend_from_slice(&tag);
    out.push(flag(s.normalization()));
    out.extend_from_slice(&[0u8; 7]);
    let m = s.matrix();
    for r in 0..dim {
        for c in 0..dim {
            out.extend_from_slice(&m[(r, c)].re.to_le_bytes());
            out.extend_from_slice(&m[(r, c)].im.to_le_bytes());
        }
    }
    out
}

fn take<const N: usize>(bytes: &[u8], at: &mut usize) -> [u8; N] {
    let mut a = [0u8; N];
    a.copy_from_slice(&bytes[*at..*at + N]);
    *at += N;
    a
}

fn grid_from(mode_count: usize, spacing: f64, center: f64) -> Result<ModeGrid> {
    if mode_count == 0 || mode_count % 2 == 0 {
        return Err(Error::Format(format!(
            "mode count {mode_count} must be odd and positive"
        )));
    }
    ModeGrid::new(center, spacing, ((mode_count - 1) / 2) as u32)
        .map_err(|e| Error::Format(format!("bad grid metadata: {e}")))
}

fn check_basis(tag: &str) -> Result<()> {
    if tag == BASIS_TAG {
        Ok(())
    } else {
        Err(Error::Format(format!(
            "basis '{tag}' is not supported; expected '{BASIS_TAG}' (a_j, a*_j per mode)"
        )))
    }
}

fn check_finite(m: &DMatrix<Complex>) -> Result<()> {
    match m.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        None => Ok(()),
        Some(k) => {
            let n = m.nrows();
            Err(Error::Format(format!(
                "non-finite entry at row {}, column {}",
                k % n,
                k / n
            )))
        }
    }
}

pub fn decode_native(bytes: &[u8]) -> Result<ScatteringMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    let mut at = 0;
    if &take::<8>(bytes, &mut at) != MAGIC {
        return Err(Error::Format("not a scattering container (bad magic)".into()));
    }
    let version = u32::from_le_bytes(take(bytes, &mut at));
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "format version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    let modes = u32::from_le_bytes(take(bytes, &mut at)) as usize;
    let spacing = f64::from_le_bytes(take(bytes, &mut at));
    let center = f64::from_le_bytes(take(bytes, &mut at));
    let tag = take::<16>(bytes, &mut at);
    let end = tag.iter().position(|&b| b == 0).unwrap_or(16);
    let tag = std::str::from_utf8(&tag[..end])
        .map_err(|_| Error::Format("basis tag is not UTF-8".into()))?;
    check_basis(tag)?;
    let normalization = match bytes[at] {
        0 => Normalization::Raw,
        1 => Normalization::PumpOffRelative,
        f => return Err(Error::Format(format!("unknown normalization flag {f}"))),
    };
    at += 8;
    let grid = grid_from(modes, spacing, center)?;
    let dim = 2 * modes;
    let expected = HEADER_LEN + 16 * dim * dim;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "payload holds {} bytes, {modes} modes need {}",
            bytes.len() - HEADER_LEN,
            expected - HEADER_LEN
        )));
    }
    let mut s = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            let re = f64::from_le_bytes(take(bytes, &mut at));
            let im = f64::from_le_bytes(take(bytes, &mut at));
            s[(r, c)] = Complex::new(re, im);
        }
    }
    check_finite(&s)?;
    ScatteringMatrix::from_parts(s, grid, normalization)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub half_span: u32,
    pub spacing_rad_per_s: f64,
    pub center_rad_per_s: f64,
    pub basis: String,
    pub normalization: String,
}

fn format_cell(z: Complex) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:?}{sign}{:?}i", z.re, z.im.abs())
}

fn parse_cell(cell: &str) -> Option<Complex> {
    let t = cell.trim();
    let body = t.strip_suffix('i').or_else(|| t.strip_suffix('j'))?;
    let split = body
        .char_indices()
        .skip(1)
        .filter(|&(k, c)| (c == '+' || c == '-') && !matches!(body.as_bytes()[k - 1], b'e' | b'E'))
        .map(|(k, _)| k)
        .last()?;
    let re: f64 = body[..split].parse().ok()?;
    let im: f64 = body[split..].trim_start_matches('+').parse().ok()?;
    Some(Complex::new(re, im))
}

/// CSV text and sidecar JSON for `s`.
pub fn write_generic_csv(s: &ScatteringMatrix) -> (String, String) {
    let m = s.matrix();
    let mut csv = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format_cell(m[(r, c)])).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    let sidecar = Sidecar {
        half_span: s.grid().half_span(),
        spacing_rad_per_s: s.grid().spacing(),
        center_rad_per_s: s.grid().center_frequency(),
        basis: BASIS_TAG.to_string(),
        normalization: s.normalization().tag().to_string(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    json.push('\n');
    (csv, json)
}

pub fn read_generic_csv(csv: &str, sidecar: &str) -> Result<ScatteringMatrix> {
    let meta: Sidecar = serde_json::from_str(sidecar)
        .map_err(|e| Error::Format(format!("sidecar: {e}")))?;
    check_basis(&meta.basis)?;
    let normalization = Normalization::from_tag(&meta.normalization).ok_or_else(|| {
        Error::Format(format!(
            "sidecar normalization '{}' must be 'raw' or 'pump_off_relative'",
            meta.normalization
        ))
    })?;
    let grid = grid_from(2 * meta.half_span as usize + 1, meta.spacing_rad_per_s, meta.center_rad_per_s)?;
    let dim = 2 * grid.mode_count();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .from_reader(csv.as_bytes());
    let mut s = DMatrix::zeros(dim, dim);
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("csv: {e}")))?;
        if r >= dim {
            return Err(Error::Format(format!("more than {dim} rows")));
        }
        if record.len() != dim {
            return Err(Error::Format(format!(
                "row {r} has {} cells, expected {dim}",
                record.len()
            )));
        }
        for (c, cell) in record.iter().enumerate() {
            s[(r, c)] = parse_cell(cell).ok_or_else(|| {
                Error::Format(format!("row {r}, column {c}: '{cell}' is not a+bi"))
            })?;
        }
        rows += 1;
    }
    if rows != dim {
        return Err(Error::Format(format!("{rows} rows, expected {dim}")));
    }
    check_finite(&s)?;
    ScatteringMatrix::from_parts(s, grid, normalization)
}

pub fn write_native(path: &Path, s: &ScatteringMatrix) -> Result<()> {
    fs::write(path, encode_native(s))?;
    Ok(())
}

pub fn load_scattering(path: &Path, format: &DataFormat) -> Result<ScatteringMatrix> {
    match format {
        DataFormat::Native => decode_native(&fs::read(path)?),
        DataFormat::GenericCsv { sidecar } => {
            read_generic_csv(&fs::read_to_string(path)?, &fs::read_to_string(sidecar)?)
        }
    }
}
