//! Binary model persistence.
//!
//! Layout: magic `LVAE`, one version byte (1), a little-endian u32 header
//! length, a JSON header (architecture manifest, tensor shapes and byte
//! offsets, training metadata, optional latent statistics), then the raw
//! little-endian f32 parameter blob. Parameters are computed in f64 and
//! truncated to f32 on save, so save -> load -> save is byte-stable.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::latent::LatentStats;
use crate::nn::{LayerSpec, LayerStack, Tensor};
use crate::vae::{ModelWeights, TrainingMeta};

const MAGIC: &[u8; 4] = b"LVAE";
const VERSION: u8 = 1;
/// magic + version + header length.
const PREAMBLE_LEN: u64 = 9;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    stack: usize,
    layer: usize,
    slot: usize,
    shape: Vec<usize>,
    /// Byte offset into the parameter blob.
    offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    image_size: usize,
    latent_dim: usize,
    stacks: [Vec<LayerSpec>; 4],
    tensors: Vec<TensorEntry>,
    metadata: TrainingMeta,
    latent_stats: Option<LatentStats>,
}

fn stack_list(weights: &ModelWeights) -> [&LayerStack; 4] {
    [
        &weights.trunk,
        &weights.mu_head,
        &weights.logvar_head,
        &weights.decoder,
    ]
}

pub fn save_model(weights: &ModelWeights, path: &Path) -> Result<()> {
    let stacks = stack_list(weights);
    let mut tensors = Vec::new();
    let mut blob = Vec::new();
    for (si, stack) in stacks.iter().enumerate() {
        for (li, layer_params) in stack.params.iter().enumerate() {
            for (ti, tensor) in layer_params.iter().enumerate() {
                tensors.push(TensorEntry {
                    stack: si,
                    layer: li,
                    slot: ti,
                    shape: tensor.shape().to_vec(),
                    offset: blob.len() as u64,
                });
                for &v in tensor.data() {
                    blob.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
        }
    }
    let header = ModelHeader {
        image_size: weights.image_size,
        latent_dim: weights.latent_dim,
        stacks: [
            weights.trunk.layers.clone(),
            weights.mu_head.layers.clone(),
            weights.logvar_head.layers.clone(),
            weights.decoder.layers.clone(),
        ],
        tensors,
        metadata: weights.metadata.clone(),
        latent_stats: weights.latent_stats.clone(),
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::Validation(format!("model header serialization: {e}")))?;

    let mut bytes = Vec::with_capacity(PREAMBLE_LEN as usize + header_json.len() + blob.len());
    bytes.extend_from_slice(MAGIC);
    bytes.push(VERSION);
    bytes.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    bytes.extend_from_slice(&blob);
    write_atomic(path, &bytes)
}

pub fn load_model(path: &Path) -> Result<ModelWeights> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelWeights> {
    if bytes.len() < PREAMBLE_LEN as usize {
        return Err(Error::format(
            bytes.len() as u64,
            "file truncated before the header length field",
        ));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(0, "bad magic, expected LVAE"));
    }
    if bytes[4] != VERSION {
        return Err(Error::format(
            4,
            format!("unsupported model version {}, reader supports {VERSION}", bytes[4]),
        ));
    }
    let header_len = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let blob_start = PREAMBLE_LEN as usize + header_len;
    if bytes.len() < blob_start {
        return Err(Error::format(
            bytes.len() as u64,
            format!("file truncated inside the header ({header_len} bytes declared)"),
        ));
    }
    let header: ModelHeader = serde_json::from_slice(&bytes[9..blob_start])
        .map_err(|e| Error::format(PREAMBLE_LEN, format!("malformed header JSON: {e}")))?;
    let blob = &bytes[blob_start..];

    let expected_blob: u64 = header
        .tensors
        .iter()
        .map(|t| 4 * t.shape.iter().product::<usize>() as u64)
        .sum();
    if blob.len() as u64 != expected_blob {
        return Err(Error::format(
            blob_start as u64,
            format!(
                "parameter blob holds {} bytes, header declares {expected_blob}",
                blob.len()
            ),
        ));
    }

    let mut stacks: Vec<LayerStack> = header
        .stacks
        .iter()
        .map(|layers| LayerStack {
            layers: layers.clone(),
            params: layers.iter().map(|_| Vec::new()).collect(),
        })
        .collect();

    let mut expected_offset = 0u64;
    for entry in &header.tensors {
        if entry.offset != expected_offset {
            return Err(Error::format(
                blob_start as u64 + entry.offset,
                format!(
                    "tensor offset {} breaks the contiguous layout (expected {expected_offset})",
                    entry.offset
                ),
            ));
        }
        let len: usize = entry.shape.iter().product();
        let start = entry.offset as usize;
        let data: Vec<f64> = blob[start..start + 4 * len]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        let tensor = Tensor::new(entry.shape.clone(), data)?;
        let stack = stacks.get_mut(entry.stack).ok_or_else(|| {
            Error::format(
                blob_start as u64 + entry.offset,
                format!("tensor references unknown stack {}", entry.stack),
            )
        })?;
        let layer_params = stack.params.get_mut(entry.layer).ok_or_else(|| {
            Error::format(
                blob_start as u64 + entry.offset,
                format!("tensor references unknown layer {}", entry.layer),
            )
        })?;
        if entry.slot != layer_params.len() {
            return Err(Error::format(
                blob_start as u64 + entry.offset,
                format!("tensor slot {} arrives out of order", entry.slot),
            ));
        }
        layer_params.push(tensor);
        expected_offset += 4 * len as u64;
    }

    for (si, stack) in stacks.iter().enumerate() {
        for (li, layer) in stack.layers.iter().enumerate() {
            let expected = layer.param_shapes();
            let got: Vec<Vec<usize>> = stack.params[li]
                .iter()
                .map(|t| t.shape().to_vec())
                .collect();
            if expected != got {
                return Err(Error::format(
                    PREAMBLE_LEN,
                    format!(
                        "stack {si} layer {li}: parameter shapes {got:?} do not match the layer spec {expected:?}"
                    ),
                ));
            }
        }
    }

    let mut iter = stacks.into_iter();
    Ok(ModelWeights {
        image_size: header.image_size,
        latent_dim: header.latent_dim,
        trunk: iter.next().expect("four stacks"),
        mu_head: iter.next().expect("four stacks"),
        logvar_head: iter.next().expect("four stacks"),
        decoder: iter.next().expect("four stacks"),
        metadata: header.metadata,
        latent_stats: header.latent_stats,
    })
}
