//! Versioned, checksummed model files.
//!
//! A model file is a JSON object holding the model's own fields plus
//! `kind`, `format_version` and `checksum`. The checksum is the SHA-256 of
//! the compact JSON of every other field with keys in sorted order, so it is
//! independent of the pretty-printing of the file itself.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::baselines::{LinearModel, PersistenceModel, TreeBaseline};
use crate::data::NormParams;
use crate::error::{Error, Result};
use crate::glassbox::GlassBoxModel;
use crate::matrix::Matrix;
use crate::predictor::Predictor;

pub const FORMAT_VERSION: u32 = 1;

/// Any model the toolkit can write to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)] // one model per file; boxing buys nothing
pub enum SavedModel {
    Windebm(GlassBoxModel),
    Linear(LinearModel),
    Tree(TreeBaseline),
    Persistence(PersistenceModel),
}

impl SavedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Windebm(_) => "windebm",
            SavedModel::Linear(_) => "linear",
            SavedModel::Tree(_) => "tree",
            SavedModel::Persistence(_) => "persistence",
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            SavedModel::Windebm(m) => &m.feature_names,
            SavedModel::Linear(m) => &m.feature_names,
            SavedModel::Tree(m) => &m.feature_names,
            SavedModel::Persistence(m) => &m.feature_names,
        }
    }

    pub fn normalization(&self) -> Option<&NormParams> {
        match self {
            SavedModel::Windebm(m) => m.normalization.as_ref(),
            SavedModel::Linear(m) => m.normalization.as_ref(),
            SavedModel::Tree(m) => m.normalization.as_ref(),
            SavedModel::Persistence(m) => m.normalization.as_ref(),
        }
    }

    pub fn as_predictor(&self) -> &dyn Predictor {
        match self {
            SavedModel::Windebm(m) => m,
            SavedModel::Linear(m) => m,
            SavedModel::Tree(m) => m,
            SavedModel::Persistence(m) => m,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.as_predictor().predict(x)
    }
}

fn checksum(payload: &Map<String, Value>) -> Result<String> {
    let canonical = serde_json::to_string(payload)
        .map_err(|e| Error::CorruptModel(format!("cannot serialize payload: {e}")))?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

fn payload(model: &SavedModel) -> Result<Map<String, Value>> {
    let value = serde_json::to_value(model)
        .map_err(|e| Error::param(format!("model is not serializable: {e}")))?;
    let Value::Object(mut payload) = value else {
        unreachable!("tagged enums serialize to objects")
    };
    payload.insert("format_version".into(), Value::from(FORMAT_VERSION));
    Ok(payload)
}

/// The checksum `model`'s file would carry.
pub fn model_checksum(model: &SavedModel) -> Result<String> {
    checksum(&payload(model)?)
}

/// The file contents for `model`.
pub fn encode(model: &SavedModel) -> Result<String> {
    let mut payload = payload(model)?;
    let sum = checksum(&payload)?;
    payload.insert("checksum".into(), Value::String(sum));
    let mut text = serde_json::to_string_pretty(&Value::Object(payload))
        .map_err(|e| Error::param(format!("model is not serializable: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Parses and verifies file contents.
pub fn decode(text: &str) -> Result<SavedModel> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::CorruptModel(e.to_string()))?;
    let Value::Object(mut payload) = value else {
        return Err(Error::CorruptModel("top level is not an object".into()));
    };
    let version = payload
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::CorruptModel("missing format_version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let stored = match payload.remove("checksum") {
        Some(Value::String(s)) => s,
        _ => return Err(Error::CorruptModel("missing checksum".into())),
    };
    if checksum(&payload)? != stored {
        return Err(Error::ChecksumMismatch);
    }
    payload.remove("format_version");
    serde_json::from_value(Value::Object(payload)).map_err(|e| Error::CorruptModel(e.to_string()))
}

pub fn save(model: &SavedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(model)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<SavedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode(&text)
}

pub fn save_model(model: &GlassBoxModel, path: impl AsRef<Path>) -> Result<()> {
    save(&SavedModel::Windebm(model.clone()), path)
}

/// Loads a glass-box model; other model kinds are rejected.
pub fn load_model(path: impl AsRef<Path>) -> Result<GlassBoxModel> {
    match load(path)? {
        SavedModel::Windebm(m) => Ok(m),
        other => Err(Error::CorruptModel(format!(
            "expected a windebm model, found `{}`",
            other.kind()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::LinearModel;

    fn linear() -> SavedModel {
        SavedModel::Linear(LinearModel {
            intercept: 0.1 + 0.2,
            weights: vec![1.0 / 3.0, -2.5e-17, 7.0],
            feature_names: vec!["a".into(), "b".into(), "c".into()],
            normalization: None,
            rank_deficient: false,
        })
    }

    #[test]
    fn round_trip_is_exact() {
        let m = linear();
        let text = encode(&m).unwrap();
        assert_eq!(decode(&text).unwrap(), m);
        assert_eq!(encode(&decode(&text).unwrap()).unwrap(), text);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let text = encode(&linear()).unwrap();
        let err = decode(&text[..text.len() / 2]).unwrap_err();
        assert!(err.to_string().starts_with("corrupt model file"), "{err}");
    }

    #[test]
    fn future_version_is_rejected() {
        let text = encode(&linear()).unwrap().replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(
            decode(&text),
            Err(Error::UnsupportedVersion { found: 2, supported: 1 })
        ));
    }

    #[test]
    fn tampering_breaks_checksum() {
        let text = encode(&linear()).unwrap().replace("7.0", "7.5");
        assert!(matches!(decode(&text), Err(Error::ChecksumMismatch)));
    }

    #[test]
    fn kind_tag_is_written() {
        assert!(encode(&linear()).unwrap().contains("\"kind\": \"linear\""));
    }
}
