//! Model files: a JSON document with `format_version`, `spec`, `params`
//! and `meta`. Parameter arrays are written with 17 significant digits so a
//! save/load cycle reproduces every `f64` bit for bit.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use std::fs;
use std::path::Path;
use thiserror::Error;

use super::{LayerParams, NetworkParams, NetworkSpec};
use crate::tensor::Tensor;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("unsupported format_version {found} (expected {expected})")]
    Version { found: u64, expected: u32 },
    #[error("shape inconsistency: {0}")]
    Shape(String),
}

impl ModelIoError {
    /// Stable numeric code per failure class.
    pub fn code(&self) -> i32 {
        match self {
            Self::Io { .. } => 10,
            Self::Malformed(_) => 11,
            Self::Version { .. } => 12,
            Self::Shape(_) => 13,
        }
    }
}

/// Float written with 17 significant digits.
#[derive(Debug, Clone, Copy)]
pub(crate) struct F17(pub f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for F17 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        f64::deserialize(d).map(F17)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct LayerDoc {
    pub weights: Vec<Vec<F17>>,
    pub bias: Vec<F17>,
}

impl LayerDoc {
    pub fn from_layer(l: &LayerParams) -> Self {
        let cols = l.fan_in();
        Self {
            weights: l
                .weight
                .data()
                .chunks(cols.max(1))
                .map(|r| r.iter().map(|&v| F17(v)).collect())
                .collect(),
            bias: l.bias.data().iter().map(|&v| F17(v)).collect(),
        }
    }

    /// Rebuilds the layer, checking against the declared `[fan_out, fan_in]`.
    pub fn to_layer(&self, index: usize, fan_in: usize, fan_out: usize) -> Result<LayerParams, ModelIoError> {
        if self.weights.len() != fan_out || self.weights.iter().any(|r| r.len() != fan_in) {
            let cols: Vec<usize> = self.weights.iter().map(Vec::len).collect();
            return Err(ModelIoError::Shape(format!(
                "layer {index}: weight rows {cols:?}, declared [{fan_out}, {fan_in}]"
            )));
        }
        if self.bias.len() != fan_out {
            return Err(ModelIoError::Shape(format!(
                "layer {index}: bias length {}, declared {fan_out}",
                self.bias.len()
            )));
        }
        let w: Vec<f64> = self.weights.iter().flatten().map(|v| v.0).collect();
        let b: Vec<f64> = self.bias.iter().map(|v| v.0).collect();
        let bad = |e: crate::tensor::TensorError| ModelIoError::Shape(format!("layer {index}: {e}"));
        Ok(LayerParams {
            weight: Tensor::new(vec![fan_out, fan_in], w).map_err(bad)?,
            bias: Tensor::new(vec![fan_out], b).map_err(bad)?,
        })
    }
}

/// Training provenance stored alongside the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ModelMeta {
    pub problem: String,
    pub epochs: usize,
    pub final_loss: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub spec: NetworkSpec,
    pub params: NetworkParams,
    pub meta: ModelMeta,
}

#[derive(Serialize)]
struct ModelDocOut<'a> {
    format_version: u32,
    spec: &'a NetworkSpec,
    params: Vec<LayerDoc>,
    meta: &'a ModelMeta,
}

#[derive(Deserialize)]
struct ModelDocIn {
    #[allow(dead_code)]
    format_version: u64,
    spec: NetworkSpec,
    params: Vec<LayerDoc>,
    meta: ModelMeta,
}

pub(crate) fn read_text(path: &Path) -> Result<String, ModelIoError> {
    fs::read_to_string(path).map_err(|source| ModelIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), ModelIoError> {
    let io = |source| ModelIoError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    // Write-then-rename so readers never observe a partial file.
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Parses a versioned document: malformed JSON and wrong versions are
/// reported separately from schema errors.
pub(crate) fn parse_versioned<T: DeserializeOwned>(text: &str, expected: u32) -> Result<T, ModelIoError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ModelIoError::Malformed(e.to_string()))?;
    let found = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| ModelIoError::Malformed("missing integer `format_version`".into()))?;
    if found != u64::from(expected) {
        return Err(ModelIoError::Version { found, expected });
    }
    serde_json::from_value(value).map_err(|e| ModelIoError::Malformed(e.to_string()))
}

/// Rebuilds parameters from layer documents, validating against `spec`.
pub(crate) fn layers_from_docs(spec: &NetworkSpec, docs: &[LayerDoc]) -> Result<NetworkParams, ModelIoError> {
    spec.validate().map_err(|e| ModelIoError::Malformed(e.to_string()))?;
    let widths = spec.subnet_widths();
    let per = widths.len() - 1;
    let expected = per * spec.subnet_count();
    if docs.len() != expected {
        return Err(ModelIoError::Shape(format!(
            "{} parameter layers, spec declares {expected}",
            docs.len()
        )));
    }
    let layers = docs
        .iter()
        .enumerate()
        .map(|(i, d)| d.to_layer(i, widths[i % per], widths[i % per + 1]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NetworkParams { layers })
}

pub fn model_to_string(model: &ModelFile) -> Result<String, ModelIoError> {
    let doc = ModelDocOut {
        format_version: MODEL_FORMAT_VERSION,
        spec: &model.spec,
        params: model.params.layers.iter().map(LayerDoc::from_layer).collect(),
        meta: &model.meta,
    };
    serde_json::to_string_pretty(&doc).map_err(|e| ModelIoError::Malformed(e.to_string()))
}

pub fn model_from_str(text: &str) -> Result<ModelFile, ModelIoError> {
    let doc: ModelDocIn = parse_versioned(text, MODEL_FORMAT_VERSION)?;
    let params = layers_from_docs(&doc.spec, &doc.params)?;
    Ok(ModelFile {
        spec: doc.spec,
        params,
        meta: doc.meta,
    })
}

pub fn save_model(model: &ModelFile, path: &Path) -> Result<(), ModelIoError> {
    write_text(path, &model_to_string(model)?)
}

pub fn load_model(path: &Path) -> Result<ModelFile, ModelIoError> {
    model_from_str(&read_text(path)?)
}
