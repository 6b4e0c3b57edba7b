//! JSON model files.
//!
//! ```json
//! {"format_version": 1,
//!  "layers": [{"activation": "relu", "weights": [[...], ...], "bias": [...]},
//!             {"activation": "softclip", "softclip_param": 2.0, ...},
//!             {"activation": null, ...}]}
//! ```
//!
//! Floats are written in shortest round-trip form and parsed exactly.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{DenseLayer, DenseNetwork};
use crate::activation::Activation;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format_version: u32,
    layers: Vec<LayerDoc>,
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    activation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    softclip_param: Option<f64>,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

pub fn model_to_json(net: &DenseNetwork) -> String {
    let doc = ModelDoc {
        format_version: MODEL_FORMAT_VERSION,
        layers: net
            .layers()
            .iter()
            .map(|l| LayerDoc {
                activation: l.activation().map(|a| a.tag().to_string()),
                softclip_param: l.activation().and_then(|a| a.param()),
                weights: l.weights().rows().into_iter().map(|r| r.to_vec()).collect(),
                bias: l.bias().to_vec(),
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("model document serializes")
}

pub fn model_from_json(text: &str) -> Result<DenseNetwork> {
    let doc: ModelDoc =
        serde_json::from_str(text).map_err(|e| Error::malformed("$", e.to_string()))?;
    if doc.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::malformed(
            "format_version",
            format!("unsupported version {}", doc.format_version),
        ));
    }
    if doc.layers.is_empty() {
        return Err(Error::malformed("layers", "no layers"));
    }
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (l, layer) in doc.layers.into_iter().enumerate() {
        let at = |field: &str| format!("layers[{l}].{field}");
        let activation = match layer.activation.as_deref() {
            None => {
                if layer.softclip_param.is_some() {
                    return Err(Error::malformed(
                        at("softclip_param"),
                        "set without softclip",
                    ));
                }
                None
            }
            Some(tag) => Some(
                Activation::from_tag(tag, layer.softclip_param)
                    .map_err(|e| Error::malformed(at("activation"), e.to_string()))?,
            ),
        };
        let rows = layer.weights.len();
        let cols = layer.weights.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::malformed(at("weights"), "empty weight matrix"));
        }
        if let Some(r) = layer.weights.iter().position(|row| row.len() != cols) {
            return Err(Error::malformed(
                format!("layers[{l}].weights[{r}]"),
                format!(
                    "row has {} entries, expected {cols}",
                    layer.weights[r].len()
                ),
            ));
        }
        if layer.bias.len() != rows {
            return Err(Error::malformed(
                at("bias"),
                format!(
                    "length {} does not match {rows} weight rows",
                    layer.bias.len()
                ),
            ));
        }
        let flat: Vec<f64> = layer.weights.into_iter().flatten().collect();
        let weights = Array2::from_shape_vec((rows, cols), flat).expect("shape checked");
        let dense = DenseLayer::new(weights, Array1::from(layer.bias), activation)
            .map_err(|e| Error::malformed(format!("layers[{l}]"), e.to_string()))?;
        if let Some(prev) = layers.last().map(DenseLayer::out_units) {
            if prev != cols {
                return Err(Error::malformed(
                    at("weights"),
                    format!("{cols} inputs but previous layer has {prev} outputs"),
                ));
            }
        }
        layers.push(dense);
    }
    DenseNetwork::new(layers).map_err(|e| Error::malformed("layers", e.to_string()))
}

pub fn save_model(net: &DenseNetwork, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(net)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<DenseNetwork> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
