//! Files exchanged between `lot run` and `lot compare`.

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use lot_core::{Circuit, ErrorModel};

use crate::error::CliError;

/// A reconstructed model as written to `model.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelReport {
    /// Experiment that produced the model.
    pub source: String,
    pub d: usize,
    pub model: ErrorModel,
}

impl ModelReport {
    pub fn new(source: &str, model: ErrorModel) -> Self {
        Self { source: source.to_string(), d: model.dim(), model }
    }
}

/// A circuit with its measured or exact survival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthRecord {
    pub circuit: Circuit,
    pub truth: f64,
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}
