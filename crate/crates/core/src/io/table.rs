//! Comma-separated tables with one header row. Lengths are written in µm.

use std::path::Path;

use serde::Serialize;

use crate::analysis::Profile;
use crate::Error;

pub const UM: f64 = 1e6;

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Error> {
    let wrap = |source| Error::Table {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct ProfileRow {
    x_um: f64,
    value: f64,
}

/// Cross-section as `x_um,value`.
pub fn write_profile(path: &Path, profile: &Profile) -> Result<(), Error> {
    let rows: Vec<ProfileRow> = profile
        .x
        .iter()
        .zip(&profile.v)
        .map(|(&x, &value)| ProfileRow { x_um: x * UM, value })
        .collect();
    write_csv(path, &rows)
}
