//! Model files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic "CELLCAST"
//! 8       4     format version (u32)
//! 12      8     header length H (u64)
//! 20      H     header: UTF-8 JSON {architecture, train_config, lma_config, training_log}
//! 20+H    8     parameter count P (u64)
//! 28+H    8P    parameters as IEEE-754 binary64
//! 28+H+8P 8     FNV-1a 64 checksum of every preceding byte
//! ```
//!
//! Parameters are stored as raw bits, so a reloaded model is bit-identical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{Architecture, NetworkParams};
use super::train::{TrainConfig, TrainedModel};
use crate::error::{Error, Result};
use crate::lma::LmaConfig;

pub const MAGIC: &[u8; 8] = b"CELLCAST";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    architecture: Architecture,
    train_config: TrainConfig,
    lma_config: Option<LmaConfig>,
    training_log: Vec<f64>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn encode_model(model: &TrainedModel) -> Vec<u8> {
    let header = serde_json::to_vec(&Header {
        architecture: *model.params.arch(),
        train_config: model.train_config.clone(),
        lma_config: model.lma_config.clone(),
        training_log: model.training_log.clone(),
    })
    .expect("model header serializes");
    let values = model.params.values();
    let mut out = Vec::with_capacity(36 + header.len() + 8 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let sum = fnv1a(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> std::result::Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|end| *end <= self.bytes.len())
            .ok_or_else(|| format!("truncated file: need {len} bytes at offset {}", self.pos))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn decode_model(bytes: &[u8]) -> std::result::Result<TrainedModel, String> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err("not a cellcast model file (bad magic)".into());
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        ));
    }
    let header_len = usize::try_from(cur.u64()?).map_err(|_| "corrupt header length")?;
    let header: Header = serde_json::from_slice(cur.take(header_len)?)
        .map_err(|e| format!("corrupt header: {e}"))?;
    let count = usize::try_from(cur.u64()?).map_err(|_| "corrupt parameter count")?;
    let raw = cur.take(count.checked_mul(8).ok_or("corrupt parameter count")?)?;
    let body_end = cur.pos;
    let stored = cur.u64()?;
    if cur.pos != bytes.len() {
        return Err("corrupt file: trailing bytes".into());
    }
    if fnv1a(&bytes[..body_end]) != stored {
        return Err("corrupt file: checksum mismatch".into());
    }
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let params =
        NetworkParams::from_values(header.architecture, values).map_err(|e| e.to_string())?;
    Ok(TrainedModel {
        params,
        train_config: header.train_config,
        lma_config: header.lma_config,
        training_log: header.training_log,
        format_version: version,
    })
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes).map_err(|message| Error::ModelFormat {
        path: path.to_path_buf(),
        message,
    })
}
