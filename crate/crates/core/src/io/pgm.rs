//! Binary portable grey maps (P5), 8- and 16-bit.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::grid::ScalarMap;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: invalid grey map header ({reason}); header bytes: {bytes}")]
    Header { path: PathBuf, reason: String, bytes: String },
    #[error("{path}: expected {expected} data bytes, found {found}")]
    Truncated { path: PathBuf, expected: usize, found: usize },
    #[error("{path}: image contains non-finite values")]
    NonFinite { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Greymap {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

fn escape_header(bytes: &[u8]) -> String {
    bytes
        .iter()
        .take(32)
        .flat_map(|&b| std::ascii::escape_default(b))
        .map(char::from)
        .collect()
}

/// Read a P5 grey map. Comments (`#` to end of line) are allowed between
/// header fields.
pub fn read_greymap(path: &Path) -> Result<Greymap, PgmError> {
    let data = fs::read(path).map_err(|source| PgmError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_greymap(&data, path)
}

fn parse_greymap(data: &[u8], path: &Path) -> Result<Greymap, PgmError> {
    let bad = |reason: &str| PgmError::Header {
        path: path.to_owned(),
        reason: reason.to_string(),
        bytes: escape_header(data),
    };
    if data.len() < 2 || &data[..2] != b"P5" {
        return Err(bad("missing P5 magic"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (k, field) in fields.iter_mut().enumerate() {
        // whitespace and comments
        loop {
            match data.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while data.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while data.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(bad(["missing width", "missing height", "missing maxval"][k]));
        }
        *field = std::str::from_utf8(&data[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("numeric field out of range"))?;
    }
    if !data.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("no whitespace after maxval"));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(bad("zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad("maxval must be in 1..=65535"));
    }
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let n = width.checked_mul(height).ok_or_else(|| bad("image too large"))?;
    let expected = n * bytes_per;
    let body = &data[pos..];
    if body.len() < expected {
        return Err(PgmError::Truncated {
            path: path.to_owned(),
            expected,
            found: body.len(),
        });
    }
    let samples = if bytes_per == 1 {
        body[..n].iter().map(|&b| b as u16).collect()
    } else {
        body[..expected].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    Ok(Greymap {
        width,
        height,
        maxval: maxval as u16,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Normalization {
    /// Map `[lo, hi]` to `[0, 65535]`, clamping outside values.
    Fixed { lo: f64, hi: f64 },
    /// Use the image's own min and max.
    PerImage,
}

/// Orientation of written images. The engine computes the physical
/// (inverted) image; `Upright` rotates it by a half turn for display.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum DisplayOrientation {
    #[default]
    Upright,
    Physical,
}

impl DisplayOrientation {
    pub fn as_str(&self) -> &'static str {
        match self {
            DisplayOrientation::Upright => "upright",
            DisplayOrientation::Physical => "physical",
        }
    }
}

/// Provenance recorded in the header comment and sidecar.
#[derive(Debug, Clone, Default)]
pub struct GreymapMeta {
    pub config_hash: String,
    pub seed: u64,
    pub orientation: DisplayOrientation,
    pub quantity: String,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

/// Write a 16-bit big-endian P5 grey map (maxval 65535) plus a `.txt`
/// sidecar describing normalization and provenance.
pub fn write_greymap(image: &ScalarMap, path: &Path, normalization: Normalization, meta: &GreymapMeta) -> Result<(), PgmError> {
    if image.data.iter().any(|v| !v.is_finite()) {
        return Err(PgmError::NonFinite { path: path.to_owned() });
    }
    let oriented = match meta.orientation {
        DisplayOrientation::Upright => image.rotated_half_turn(),
        DisplayOrientation::Physical => image.clone(),
    };
    let (lo, hi) = match normalization {
        Normalization::Fixed { lo, hi } => (lo, hi),
        Normalization::PerImage => oriented.min_max(),
    };
    let span = hi - lo;
    let io_err = |source| PgmError::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    let (w, h) = (oriented.grid.nx(), oriented.grid.ny());
    write!(out, "P5\n# config_hash={} seed={}\n{w} {h}\n65535\n", meta.config_hash, meta.seed).map_err(io_err)?;
    let mut buf = Vec::with_capacity(2 * oriented.data.len());
    for &v in &oriented.data {
        let t = if span > 0.0 { ((v - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
        let s = (t * 65535.0).round() as u16;
        buf.extend_from_slice(&s.to_be_bytes());
    }
    out.write_all(&buf).map_err(io_err)?;
    out.flush().map_err(io_err)?;

    let norm = match normalization {
        Normalization::Fixed { .. } => "fixed",
        Normalization::PerImage => "per_image",
    };
    let sidecar = format!(
        "quantity = {}\nnormalization = {norm}\nrange_lo = {lo}\nrange_hi = {hi}\norientation = {}\npitch_um = {}\nwidth = {w}\nheight = {h}\nconfig_hash = {}\nseed = {}\n",
        meta.quantity,
        meta.orientation.as_str(),
        image.grid.pitch() * 1e6,
        meta.config_hash,
        meta.seed
    );
    let sp = sidecar_path(path);
    fs::write(&sp, sidecar).map_err(|source| PgmError::Io { path: sp, source })?;
    Ok(())
}
