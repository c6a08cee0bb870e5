//! Outputs are staged in memory and written together with the manifest once
//! the whole experiment has succeeded.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub description: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bytes: Option<usize>,
}

#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, String, Vec<u8>)>,
}

impl Outputs {
    pub fn csv<T: Serialize>(&mut self, file: &str, description: &str, rows: &[T]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Output(e.into_error()))?;
        self.push(file, description, bytes);
        Ok(())
    }

    /// CSV from a header and rows of already formatted records.
    pub fn table(&mut self, file: &str, description: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Output(e.into_error()))?;
        self.push(file, description, bytes);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, file: &str, description: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.push(file, description, bytes);
        Ok(())
    }

    fn push(&mut self, file: &str, description: &str, bytes: Vec<u8>) {
        self.files.push((file.to_string(), description.to_string(), bytes));
    }

    pub fn entries(&self) -> Vec<OutputEntry> {
        self.files
            .iter()
            .map(|(file, description, bytes)| OutputEntry {
                file: file.clone(),
                description: description.clone(),
                bytes: Some(bytes.len()),
            })
            .collect()
    }

    pub fn write_all(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        for (file, _, bytes) in &self.files {
            fs::write(dir.join(file), bytes)?;
        }
        Ok(())
    }
}

/// Fails early when `dir` cannot be created or written. Returns whether the
/// directory already existed.
pub fn check_writable(dir: &Path) -> Result<bool, CliError> {
    let invalid = |e: std::io::Error| CliError::Validation(format!("output directory {}: {e}", dir.display()));
    let existed = dir.exists();
    fs::create_dir_all(dir).map_err(invalid)?;
    let probe = dir.join(".lot-write-probe");
    let result = fs::write(&probe, b"").and_then(|_| fs::remove_file(&probe)).map_err(invalid);
    if result.is_err() && !existed {
        let _ = fs::remove_dir(dir);
    }
    result.map(|_| existed)
}
