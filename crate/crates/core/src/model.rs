//! Versioned JSON envelope for fitted models.
//!
//! ```json
//! { "format_version": 1, "kind": "crp", "model": { ... } }
//! ```
//!
//! Matrices are stored as `{rows, cols, data}` with row-major `data`. Floats
//! use shortest round-trip formatting, so save/load is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{LdaModel, TwoDldaModel};
use crate::classify::Embedder;
use crate::crp::CrpModel;
use crate::error::{CrpError, Result};
use crate::kronlin::{Matrix, Vector};
use crate::stats::Dataset;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum SavedModel {
    Crp(CrpModel),
    Lda(LdaModel),
    TwoDlda(TwoDldaModel),
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format_version: u32,
    #[serde(flatten)]
    model: SavedModel,
}

impl SavedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Crp(_) => "crp",
            SavedModel::Lda(_) => "lda",
            SavedModel::TwoDlda(_) => "two_dlda",
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let env = Envelope {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        serde_json::to_string_pretty(&env)
            .map_err(|e| CrpError::NumericalFailure(format!("model serialization: {e}")))
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let env: Envelope = serde_json::from_str(text)
            .map_err(|e| CrpError::parse(origin, e.line() as u64, e.to_string()))?;
        if env.format_version != MODEL_FORMAT_VERSION {
            return Err(CrpError::parse(
                origin,
                1,
                format!(
                    "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                    env.format_version
                ),
            ));
        }
        Ok(env.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| CrpError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CrpError::io(path, e))?;
        Self::from_json(&text, path)
    }
}

impl Embedder for SavedModel {
    fn embed(&self, x: &Matrix) -> Result<Vector> {
        match self {
            SavedModel::Crp(m) => Embedder::embed(m, x),
            SavedModel::Lda(m) => Embedder::embed(m, x),
            SavedModel::TwoDlda(m) => Embedder::embed(m, x),
        }
    }

    fn traces(&self) -> Vec<Vec<f64>> {
        match self {
            SavedModel::Crp(m) => m.traces(),
            SavedModel::Lda(m) => m.traces(),
            SavedModel::TwoDlda(m) => m.traces(),
        }
    }

    fn embed_dataset(&self, d: &Dataset) -> Result<Vec<(Vector, usize)>> {
        match self {
            SavedModel::Crp(m) => Embedder::embed_dataset(m, d),
            SavedModel::Lda(m) => Embedder::embed_dataset(m, d),
            SavedModel::TwoDlda(m) => Embedder::embed_dataset(m, d),
        }
    }
}
