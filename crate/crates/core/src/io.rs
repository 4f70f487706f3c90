//! CSV and JSON persistence of densities and atomic file replacement.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! value read back is bit-identical to the value written.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::density::{GridDensity, QuantileDensity};
use crate::error::{Error, Result};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), reason: reason.into() }
}

/// Writes `bytes` to `path` through a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Serializes `value` as pretty JSON and writes it atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| format_err(path, e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Reads JSON from `path`.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))
}

/// Writes a CSV table atomically.
pub fn write_table(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| format_err(path, e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| format_err(path, e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| format_err(path, e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Reads a CSV table as its header and string rows.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(err) => io_err(path, err),
        other => format_err(path, format!("{other:?}")),
    })?;
    let header = r.headers().map_err(|e| format_err(path, e.to_string()))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| format_err(path, e.to_string()))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn numeric_columns(path: &Path, expected: &[&str]) -> Result<Vec<Vec<f64>>> {
    let (header, rows) = read_table(path)?;
    if header.iter().map(String::as_str).ne(expected.iter().copied()) {
        return Err(format_err(path, format!("expected header {}, found {}", expected.join(","), header.join(","))));
    }
    let mut cols = vec![Vec::with_capacity(rows.len()); expected.len()];
    for (line, row) in rows.iter().enumerate() {
        for (k, field) in row.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| format_err(path, format!("row {}: {field:?} is not a number", line + 1)))?;
            cols[k].push(v);
        }
    }
    Ok(cols)
}

/// Writes a grid density as CSV with header `x,v`.
pub fn write_grid_csv(path: &Path, v: &GridDensity) -> Result<()> {
    let rows = (0..v.len()).map(|i| vec![v.x(i).to_string(), v.values()[i].to_string()]);
    write_table(path, &["x".to_string(), "v".to_string()], rows)
}

/// Reads a grid density written as CSV with header `x,v`. The `x` column
/// must be uniformly spaced.
pub fn read_grid_csv(path: &Path) -> Result<GridDensity> {
    let cols = numeric_columns(path, &["x", "v"])?;
    let (x, v) = (&cols[0], &cols[1]);
    if x.len() < 2 {
        return Err(format_err(path, "grid needs at least two rows"));
    }
    let dx = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    for (i, xi) in x.iter().enumerate() {
        if (xi - (x[0] + i as f64 * dx)).abs() > 1e-9 * dx.abs().max(1e-300) + 1e-12 * xi.abs() {
            return Err(format_err(path, format!("x column is not uniformly spaced at row {}", i + 1)));
        }
    }
    GridDensity::new(x[0], dx, v.clone()).map_err(|e| format_err(path, e.to_string()))
}

/// Writes a quantile density as CSV with header `s,X`.
pub fn write_quantile_csv(path: &Path, q: &QuantileDensity) -> Result<()> {
    let rows = q.positions().iter().enumerate().map(|(i, x)| vec![q.fraction(i).to_string(), x.to_string()]);
    write_table(path, &["s".to_string(), "X".to_string()], rows)
}

/// Reads a quantile density written as CSV with header `s,X`. The mass is
/// recovered from the cell-centred fractions `s_i = (i + 1/2) M / N`.
pub fn read_quantile_csv(path: &Path) -> Result<QuantileDensity> {
    let cols = numeric_columns(path, &["s", "X"])?;
    let (s, x) = (&cols[0], &cols[1]);
    let n = s.len();
    if n < 2 {
        return Err(format_err(path, "quantile file needs at least two rows"));
    }
    let mass = 2.0 * n as f64 * s[0];
    let h = mass / n as f64;
    for (i, si) in s.iter().enumerate() {
        if (si - (i as f64 + 0.5) * h).abs() > 1e-9 * mass {
            return Err(format_err(path, format!("row {}: mass fraction {si} is not cell-centred", i + 1)));
        }
    }
    QuantileDensity::new(mass, x.clone()).map_err(|e| format_err(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::SmythHill;

    #[test]
    fn csv_round_trips_are_exact() {
        let dir = tempfile::tempdir().unwrap();
        let sh = SmythHill::new(0.7).unwrap();
        let q = sh.quantiles(37).unwrap();
        let p = dir.path().join("q.csv");
        write_quantile_csv(&p, &q).unwrap();
        let back = read_quantile_csv(&p).unwrap();
        assert_eq!(back.positions(), q.positions());
        assert!((back.mass() - q.mass()).abs() < 1e-15);

        let g = sh.sample_symmetric(101, 1.3).unwrap();
        let p = dir.path().join("g.csv");
        write_grid_csv(&p, &g).unwrap();
        let back = read_grid_csv(&p).unwrap();
        assert_eq!(back.values(), g.values());
        assert!(back.same_grid(&g));
    }

    #[test]
    fn malformed_quantile_file_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "s,X\n0.25,1.0\n0.75,-1.0\n").unwrap();
        let err = read_quantile_csv(&p).unwrap_err().to_string();
        assert!(err.contains("bad.csv"), "{err}");
    }
}
