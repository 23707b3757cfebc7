//! CSV and JSON writers plus the content-hash inventory.
//!
//! Floats go to CSV as `{:.16e}` (17 significant digits, period separator,
//! independent of locale) and to JSON in serde_json's shortest round-trip form.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sirwave_core::Profile;
use walkdir::WalkDir;

use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Write a CSV with a header row; every record must match the header width.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let to_err = |e: csv::Error| CliError::io(path, e.into());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(to_err)?;
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_profile_csv(path: &Path, u: &Profile) -> Result<(), CliError> {
    let g = u.grid();
    write_csv(
        path,
        &["x", "S", "I", "R"],
        (0..g.n).map(|k| {
            vec![
                fmt_f64(g.x(k)),
                fmt_f64(u.s.values[k]),
                fmt_f64(u.i.values[k]),
                fmt_f64(u.r.values[k]),
            ]
        }),
    )
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory, with `/` separators.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64), CliError> {
    let data = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok((hex::encode(Sha256::digest(&data)), data.len() as u64))
}

/// Every file under `dir` except manifests, sorted by relative path.
/// Manifests carry timestamps and are excluded from the inventory.
pub fn inventory(dir: &Path) -> Result<Vec<FileEntry>, CliError> {
    let mut out = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::io(dir, e.into()))?;
        if !entry.file_type().is_file() || entry.file_name() == MANIFEST_NAME {
            continue;
        }
        let rel: PathBuf = entry.path().strip_prefix(dir).expect("walk stays below its root").into();
        let (sha256, bytes) = sha256_file(entry.path())?;
        out.push(FileEntry {
            path: rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"),
            sha256,
            bytes,
        });
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}
