//! CSV input, atomic output and file digests.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;
use wtest_core::Sample;

use crate::CliError;

/// Reads a numeric CSV into a sample.
///
/// A first row that does not parse as numbers is taken to be a header. Every
/// other row must hold the same number of finite decimal values.
pub fn read_sample(path: &Path) -> Result<Sample, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_sample(&bytes, path)
}

pub fn parse_sample(bytes: &[u8], path: &Path) -> Result<Sample, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| CliError::Input(format!("{}: malformed CSV: {e}", path.display())))?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if k == 0 => continue,
            Err(e) => {
                return Err(CliError::Input(format!(
                    "{}: line {line}: cannot parse number: {e}",
                    path.display()
                )))
            }
        };
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(CliError::Input(format!(
                "{}: line {line}: non-finite value {bad}",
                path.display()
            )));
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(CliError::Input(format!(
                    "{}: line {line}: expected {w} columns, found {}",
                    path.display(),
                    values.len()
                )))
            }
            _ => {}
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    Sample::from_rows(&rows).map_err(CliError::from)
}

/// Reads a sample that must already lie in the unit box.
pub fn read_unit_box_sample(path: &Path) -> Result<Sample, CliError> {
    read_sample(path)?.into_unit_box().map_err(|e| {
        CliError::Input(format!(
            "{}: {e}; map the data with a fixed box first (see `gen`)",
            path.display()
        ))
    })
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io_err =
        |e: std::io::Error| CliError::Input(format!("cannot write {}: {e}", path.display()));
    let mut tmp = NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents).map_err(io_err)?;
    tmp.flush().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Input(format!("cannot encode JSON: {e}")))?;
    text.push(b'\n');
    write_atomic(path, &text)
}

/// Writes rows of optional numbers under `header` (omitted when empty);
/// `None` becomes an empty cell.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Option<f64>>]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let enc = |e: csv::Error| CliError::Input(format!("cannot encode CSV: {e}"));
    if !header.is_empty() {
        writer.write_record(header).map_err(enc)?;
    }
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .map(|v| v.map(|x| format!("{x:?}")).unwrap_or_default())
            .collect();
        writer.write_record(&cells).map_err(enc)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Input(format!("cannot encode CSV: {e}")))?;
    write_atomic(path, &bytes)
}
