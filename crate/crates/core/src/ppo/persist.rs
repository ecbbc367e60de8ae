//! Model files: a JSON document with a shape header, a config hash and the flat parameters.
//!
//! ```json
//! {
//!   "format": "busched-policy",
//!   "version": 1,
//!   "architecture": { "input_dim": 55, "hidden": [128, 64, 32], "n_actions": 8 },
//!   "state_dim": 55,
//!   "n_slots": 8,
//!   "config_hash": "<sha256 hex>",
//!   "layers": [ { "name": "state.0", "inputs": 55, "outputs": 128 }, ... ],
//!   "params": [ ... ]
//! }
//! ```
//!
//! Parameters are written with shortest round-trip formatting and parsed exactly, so a
//! save/load cycle is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::net::{Architecture, PolicyNet};
use crate::error::{Error, Result};
use crate::io::{read_text, write_atomic};

pub const FORMAT: &str = "busched-policy";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerShape {
    pub name: String,
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    architecture: Architecture,
    state_dim: usize,
    n_slots: usize,
    config_hash: String,
    layers: Vec<LayerShape>,
    params: Vec<f64>,
}

/// SHA-256 of the JSON encoding of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serialises");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub net: PolicyNet,
    pub config_hash: String,
    pub config_hash_matches: bool,
}

pub fn save_params(net: &PolicyNet, config_hash: &str, path: &Path) -> Result<()> {
    let arch = *net.arch();
    let file = ModelFile {
        format: FORMAT.into(),
        version: VERSION,
        architecture: arch,
        state_dim: arch.input_dim,
        n_slots: arch.n_actions,
        config_hash: config_hash.into(),
        layers: net
            .layers()
            .iter()
            .map(|l| LayerShape {
                name: l.name.into(),
                inputs: l.inputs,
                outputs: l.outputs,
            })
            .collect(),
        params: net.params().to_vec(),
    };
    let text = serde_json::to_string(&file).map_err(|e| Error::Json {
        what: path.display().to_string(),
        source: e,
    })?;
    write_atomic(path, text.as_bytes())
}

/// Loads a model and checks it against the expected state dimension and slot count. A
/// differing config hash is reported (and logged) but not fatal.
pub fn load_params(
    path: &Path,
    state_dim: usize,
    n_slots: usize,
    expected_hash: Option<&str>,
) -> Result<LoadedModel> {
    let text = read_text(path)?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Json {
        what: path.display().to_string(),
        source: e,
    })?;
    if file.format != FORMAT || file.version != VERSION {
        return Err(Error::ModelMismatch(format!(
            "{}: unsupported format {} v{}",
            path.display(),
            file.format,
            file.version
        )));
    }
    if file.state_dim != state_dim || file.architecture.input_dim != state_dim {
        return Err(Error::ModelMismatch(format!(
            "{}: model expects state dimension {}, instance produces {state_dim}",
            path.display(),
            file.state_dim
        )));
    }
    if file.n_slots != n_slots || file.architecture.n_actions != n_slots {
        return Err(Error::ModelMismatch(format!(
            "{}: model has {} action slots, instance needs {n_slots}",
            path.display(),
            file.n_slots
        )));
    }
    let net = PolicyNet::from_params(file.architecture, file.params)?;
    let declared: Vec<(usize, usize)> = file.layers.iter().map(|l| (l.inputs, l.outputs)).collect();
    let actual: Vec<(usize, usize)> = net.layers().iter().map(|l| (l.inputs, l.outputs)).collect();
    if declared != actual {
        return Err(Error::ModelMismatch(format!(
            "{}: layer table {declared:?} disagrees with architecture {actual:?}",
            path.display()
        )));
    }
    if !net.is_finite() {
        return Err(Error::ModelMismatch(format!("{}: non-finite parameters", path.display())));
    }
    let config_hash_matches = expected_hash.map_or(true, |h| h == file.config_hash);
    if !config_hash_matches {
        log::warn!(
            "{}: config hash {} differs from the current configuration",
            path.display(),
            file.config_hash
        );
    }
    Ok(LoadedModel {
        net,
        config_hash: file.config_hash,
        config_hash_matches,
    })
}
