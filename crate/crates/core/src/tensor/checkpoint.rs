use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Params, Real, Tensor};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint JSON")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint format version {0}")]
    Version(u32),
    #[error("parameter {path}: {message}")]
    Param { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub path: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// Serialized parameters plus free-form model metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub seed: u64,
    pub meta: serde_json::Value,
    pub params: Vec<ParamEntry>,
}

impl Checkpoint {
    pub fn from_params<F: Real>(params: &Params<F>, seed: u64, meta: serde_json::Value) -> Self {
        let params = params
            .iter()
            .map(|(_, path, t)| ParamEntry {
                path: path.to_string(),
                shape: t.shape().to_vec(),
                data: t.data().iter().map(|x| x.as_f64() as f32).collect(),
            })
            .collect();
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            seed,
            meta,
            params,
        }
    }

    pub fn to_params<F: Real>(&self) -> Result<Params<F>, CheckpointError> {
        let mut out = Params::new();
        for e in &self.params {
            let data = e.data.iter().map(|&x| F::from_f64(x as f64)).collect();
            let t = Tensor::new(e.shape.clone(), data).map_err(|err| CheckpointError::Param {
                path: e.path.clone(),
                message: err.to_string(),
            })?;
            if out.id(&e.path).is_some() {
                return Err(CheckpointError::Param {
                    path: e.path.clone(),
                    message: "duplicate path".into(),
                });
            }
            out.insert(e.path.clone(), t);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, CheckpointError> {
        let c: Checkpoint = serde_json::from_str(s)?;
        if c.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(CheckpointError::Version(c.format_version));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
