//! Parameter checkpoints: one JSON document holding the architecture and
//! every tensor, flat, in canonical order.
//!
//! Layout: `{format_version, net: {input_dim, hidden_dims, embed_dim,
//! num_classes}, tensors: [{name, values}, ...]}` where the tensor list
//! follows [`Parameters::tensor_names`] — each trunk layer's weights
//! (row-major) then its bias, then the logits head, then the embedding
//! head. Floats carry 17 significant digits, so a checkpoint loads back
//! bitwise-identical and identical parameters always write identical
//! bytes. Loading re-checks shapes and rejects non-finite values.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use strata_core::linalg::Matrix;
use strata_core::net::{Layer, NetConfig, Parameters};

use crate::error::{CliError, CliResult};
use crate::jsonfmt;

/// Version written to and required from a checkpoint file.
pub const FORMAT_VERSION: u32 = 1;
/// Default checkpoint file name inside a run directory.
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format_version: u32,
    net: NetFile,
    tensors: Vec<TensorFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetFile {
    input_dim: usize,
    hidden_dims: Vec<usize>,
    embed_dim: usize,
    num_classes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorFile {
    name: String,
    values: Vec<f64>,
}

/// Weight and bias shapes in canonical layer order: trunk layers, then
/// the logits head, then the embedding head.
fn layer_shapes(net: &NetConfig) -> Vec<(usize, usize)> {
    let mut shapes = Vec::with_capacity(net.hidden_dims.len() + 2);
    let mut prev = net.input_dim;
    for &width in &net.hidden_dims {
        shapes.push((width, prev));
        prev = width;
    }
    shapes.push((net.num_classes, prev));
    shapes.push((net.embed_dim, prev));
    shapes
}

/// Writes `params` (with its architecture) to `path`.
pub fn write(path: &Path, net: &NetConfig, params: &Parameters) -> CliResult<()> {
    let tensors = params
        .tensor_names()
        .into_iter()
        .zip(params.tensors())
        .map(|(name, values)| TensorFile { name, values: values.to_vec() })
        .collect();
    let file = CheckpointFile {
        format_version: FORMAT_VERSION,
        net: NetFile {
            input_dim: net.input_dim,
            hidden_dims: net.hidden_dims.clone(),
            embed_dim: net.embed_dim,
            num_classes: net.num_classes,
        },
        tensors,
    };
    let mut text = jsonfmt::to_string(&file)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Reads a checkpoint back into its architecture and parameters.
pub fn read(path: &Path) -> CliResult<(NetConfig, Parameters)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: {}", path.display(), e)))?;
    if file.format_version != FORMAT_VERSION {
        return Err(CliError::validation(format!(
            "{}: format version {} is not the supported {}",
            path.display(),
            file.format_version,
            FORMAT_VERSION
        )));
    }
    let net = NetConfig {
        input_dim: file.net.input_dim,
        hidden_dims: file.net.hidden_dims,
        embed_dim: file.net.embed_dim,
        num_classes: file.net.num_classes,
    };
    net.validate()?;

    let shapes = layer_shapes(&net);
    let expected: Vec<String> = shapes
        .iter()
        .enumerate()
        .flat_map(|(i, _)| {
            let stem = if i < net.hidden_dims.len() {
                format!("trunk{}", i)
            } else if i == net.hidden_dims.len() {
                String::from("logits")
            } else {
                String::from("embed")
            };
            [format!("{}.w", stem), format!("{}.b", stem)]
        })
        .collect();
    let found: Vec<&str> = file.tensors.iter().map(|t| t.name.as_str()).collect();
    if found != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(CliError::validation(format!(
            "{}: tensor list {:?} does not match the architecture's {:?}",
            path.display(),
            found,
            expected
        )));
    }

    let mut layers = Vec::with_capacity(shapes.len());
    for (pair, &(rows, cols)) in file.tensors.chunks(2).zip(&shapes) {
        let weights = Matrix::from_flat(rows, cols, pair[0].values.clone()).map_err(|e| {
            CliError::validation(format!("{}: tensor {}: {}", path.display(), pair[0].name, e))
        })?;
        layers.push(Layer { weights, bias: pair[1].values.clone() });
    }
    let embed = layers.pop().expect("shapes always include both heads");
    let logits = layers.pop().expect("shapes always include both heads");
    let params = Parameters::from_layers(&net, layers, logits, embed)
        .map_err(|e| CliError::validation(format!("{}: {}", path.display(), e)))?;
    Ok((net, params))
}
