//! Binary model file: `LSAE` magic, u16 format version, u32 header length,
//! JSON header, little-endian f64 weights in layer order, CRC-32 of all
//! preceding bytes. All integers are little-endian.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::architecture::Architecture;
use super::autoencoder::AutoencoderModel;
use super::variant::ErrorVariant;
use crate::error::{Error, Result};
use crate::neuralnet::{LayerSpec, Network};
use crate::preprocess::ScalingParams;

pub const MAGIC: &[u8; 4] = b"LSAE";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    architecture: Architecture,
    layers: Vec<LayerSpec>,
    input_dim: usize,
    window_size: usize,
    scaling: Option<ScalingParams>,
    thresholds: BTreeMap<ErrorVariant, f64>,
    seed: u64,
    param_count: usize,
}

pub fn encode_model(model: &AutoencoderModel) -> Result<Vec<u8>> {
    let header = Header {
        architecture: model.architecture,
        layers: model.network.specs(),
        input_dim: model.network.input_dim(),
        window_size: model.window_size,
        scaling: model.scaling,
        thresholds: model.thresholds.clone(),
        seed: model.seed,
        param_count: model.param_count(),
    };
    let json = serde_json::to_vec(&header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Format("header too large".into()))?;
    let mut buf = Vec::with_capacity(14 + json.len() + 8 * model.param_count());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(&json);
    for w in model.network.params() {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

pub fn decode_model(bytes: &[u8]) -> Result<AutoencoderModel> {
    if bytes.len() < 14 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing LSAE signature".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (payload, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("four bytes"));
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let len = u32::from_le_bytes(payload[6..10].try_into().expect("four bytes")) as usize;
    let body = &payload[10..];
    if body.len() < len {
        return Err(Error::Format("truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&body[..len])?;
    let blob = &body[len..];
    if blob.len() != 8 * header.param_count {
        return Err(Error::Format(format!(
            "expected {} weights, found {} bytes",
            header.param_count,
            blob.len()
        )));
    }
    let mut network = Network::new(header.input_dim, &header.layers)?;
    if network.param_len() != header.param_count {
        return Err(Error::Format("layer list disagrees with the weight count".into()));
    }
    let params = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
        .collect();
    network.set_params(params)?;
    Ok(AutoencoderModel {
        architecture: header.architecture,
        window_size: header.window_size,
        scaling: header.scaling,
        thresholds: header.thresholds,
        seed: header.seed,
        network,
    })
}

pub fn save_model(model: &AutoencoderModel, path: &Path) -> Result<()> {
    fs::write(path, encode_model(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<AutoencoderModel> {
    decode_model(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
