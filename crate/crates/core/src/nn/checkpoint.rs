use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, Model, NnError};

pub const MANIFEST_FILE: &str = "model.json";
pub const WEIGHTS_FILE: &str = "model.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into `model.bin`.
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub architecture: Architecture,
    pub seed: u64,
    pub parameter_count: usize,
    pub tensors: Vec<TensorEntry>,
    /// Free-form settings echoed by the caller, e.g. the training config.
    #[serde(default)]
    pub config: serde_json::Value,
}

/// Writes `model.json` and `model.bin` into `dir`.
pub fn save_checkpoint(model: &Model, dir: &Path, config: serde_json::Value) -> Result<CheckpointManifest, NnError> {
    fs::create_dir_all(dir)?;
    let mut bytes = Vec::new();
    let mut tensors = Vec::new();
    for (i, p) in model.params().iter().enumerate() {
        tensors.push(TensorEntry {
            name: format!("param{i}"),
            shape: p.shape.clone(),
            offset: bytes.len(),
            len: p.value.len(),
        });
        for v in &p.value {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = CheckpointManifest {
        architecture: model.architecture.clone(),
        seed: model.seed,
        parameter_count: model.parameter_count(),
        tensors,
        config,
    };
    fs::write(dir.join(WEIGHTS_FILE), &bytes)?;
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

pub fn load_checkpoint(dir: &Path) -> Result<(Model, CheckpointManifest), NnError> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: CheckpointManifest =
        serde_json::from_str(&text).map_err(|e| NnError::Checkpoint(format!("{MANIFEST_FILE}: {e}")))?;
    let bytes = fs::read(dir.join(WEIGHTS_FILE))?;
    let mut model = Model::new(manifest.architecture.clone(), manifest.seed)?;
    let mut values = Vec::with_capacity(manifest.tensors.len());
    for (entry, p) in manifest.tensors.iter().zip(model.params()) {
        if entry.shape != p.shape || entry.len != p.value.len() {
            return Err(NnError::Checkpoint(format!(
                "{} has shape {:?}, architecture expects {:?}",
                entry.name, entry.shape, p.shape
            )));
        }
        let end = entry.offset + 8 * entry.len;
        let raw = bytes
            .get(entry.offset..end)
            .ok_or_else(|| NnError::Checkpoint(format!("{WEIGHTS_FILE} is truncated at {}", entry.name)))?;
        values.push(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect::<Vec<f64>>(),
        );
    }
    if values.len() != model.params().len() {
        return Err(NnError::Checkpoint("tensor count does not match architecture".into()));
    }
    model.restore(&values)?;
    Ok((model, manifest))
}
