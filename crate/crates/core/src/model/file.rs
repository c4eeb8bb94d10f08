//! Weight file: UTF-8 JSON, format name `slr-model`, version 1.
//!
//! ```text
//! {"format":"slr-model","version":1,"labels":["A",...,"Z"],
//!  "layers":[{"in_dim":42,"out_dim":128,"activation":"relu",
//!             "biases":[...],"weights":[[...],...]}, ...]}
//! ```
//!
//! `weights[r]` holds the `in_dim` weights feeding output unit `r`. Numbers
//! are written in shortest round-trip form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, Layer, ModelError, ModelParams};
use crate::io_util::atomic_write;
use crate::label::GestureLabel;

pub const FORMAT_NAME: &str = "slr-model";
pub const FORMAT_VERSION: u32 = 1;
const SUPPORTED_VERSIONS: &[u32] = &[FORMAT_VERSION];

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    labels: Vec<GestureLabel>,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    biases: Vec<f64>,
    weights: Vec<Vec<f64>>,
}

pub fn model_to_json(params: &ModelParams) -> String {
    let file = ModelFile {
        format: FORMAT_NAME.to_string(),
        version: params.format_version(),
        labels: params.labels().to_vec(),
        layers: params
            .layers()
            .iter()
            .map(|l| LayerFile {
                in_dim: l.in_dim(),
                out_dim: l.out_dim(),
                activation: l.activation(),
                biases: l.biases().to_vec(),
                weights: l.weights().chunks(l.in_dim()).map(<[f64]>::to_vec).collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string(&file).expect("finite values serialize");
    text.push('\n');
    text
}

pub fn model_from_json(text: &str) -> Result<ModelParams, ModelError> {
    let fmt = |m: String| ModelError::Format(m);
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| fmt(e.to_string()))?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(FORMAT_NAME) => {}
        other => return Err(fmt(format!("expected format {FORMAT_NAME:?}, found {other:?}"))),
    }
    let version = value.get("version").and_then(|v| v.as_u64());
    if !version.is_some_and(|v| SUPPORTED_VERSIONS.iter().any(|&s| u64::from(s) == v)) {
        return Err(fmt(format!(
            "unsupported version {}, supported versions: {SUPPORTED_VERSIONS:?}",
            value.get("version").map_or("<missing>".to_string(), |v| v.to_string())
        )));
    }
    // Non-finite numbers cannot appear in JSON; anything serde rejects here is
    // a structural problem.
    let file: ModelFile = serde_json::from_value(value).map_err(|e| fmt(e.to_string()))?;

    let expected_labels: Vec<GestureLabel> = GestureLabel::all().collect();
    if file.labels != expected_labels {
        return Err(fmt("labels must be \"A\"..\"Z\" in index order".into()));
    }
    let layers = file
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            if l.weights.len() != l.out_dim || l.weights.iter().any(|row| row.len() != l.in_dim) {
                return Err(fmt(format!(
                    "layer {i}: weights must be {} rows of {} values",
                    l.out_dim, l.in_dim
                )));
            }
            Layer::new(
                l.in_dim,
                l.out_dim,
                l.activation,
                l.weights.concat(),
                l.biases,
            )
            .map_err(|e| fmt(format!("layer {i}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    ModelParams::new(layers).map_err(|e| fmt(e.to_string()))
}

pub fn save_model(params: &ModelParams, path: &Path) -> Result<(), ModelError> {
    atomic_write(path, model_to_json(params).as_bytes()).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<ModelParams, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    model_from_json(&text)
}
