//! Checkpoint container:
//!
//! ```text
//! b"INMTCKPT" | header length (u64 LE) | JSON header | raw little-endian data
//! ```
//!
//! The header records the format version, the model configuration and one
//! `{name, shape, dtype, offset}` entry per parameter, offsets relative to the
//! start of the data section.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{ModelConfig, ModelParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"INMTCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    #[default]
    F64,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: Dtype,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
}

pub fn write_checkpoint<W: Write>(params: &ModelParams, dtype: Dtype, mut out: W) -> Result<()> {
    let mut tensors = Vec::new();
    let mut data = Vec::with_capacity(params.num_values() * dtype.width());
    for (name, t) in params.tensors() {
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            dtype,
            offset: data.len(),
        });
        for &v in t.iter() {
            match dtype {
                Dtype::F64 => data.extend_from_slice(&v.to_le_bytes()),
                Dtype::F32 => data.extend_from_slice(&(v as f32).to_le_bytes()),
            }
        }
    }
    let header = serde_json::to_vec(&Header {
        format_version: FORMAT_VERSION,
        config: params.config,
        tensors,
    })?;
    out.write_all(MAGIC)?;
    out.write_all(&(header.len() as u64).to_le_bytes())?;
    out.write_all(&header)?;
    out.write_all(&data)?;
    Ok(())
}

/// Reads a checkpoint; when `expected` is given, the stored configuration must match it.
pub fn read_checkpoint<R: Read>(mut input: R, expected: Option<&ModelConfig>) -> Result<ModelParams> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a checkpoint file (bad magic)".into()));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = usize::try_from(u64::from_le_bytes(len))
        .map_err(|_| Error::Format("header length overflows".into()))?;
    let mut header = vec![0u8; len];
    input.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {}",
            header.format_version
        )));
    }
    if let Some(cfg) = expected {
        if cfg != &header.config {
            return Err(Error::Format(format!(
                "checkpoint config {:?} does not match expected {:?}",
                header.config, cfg
            )));
        }
    }
    header.config.validate()?;
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;

    let mut params = ModelParams::zeros(header.config);
    let slots = params.tensors_mut();
    if slots.len() != header.tensors.len() {
        return Err(Error::Format(format!(
            "expected {} tensors, found {}",
            slots.len(),
            header.tensors.len()
        )));
    }
    for ((name, mut slot), entry) in slots.into_iter().zip(&header.tensors) {
        if entry.name != name {
            return Err(Error::Format(format!(
                "expected tensor `{name}`, found `{}`",
                entry.name
            )));
        }
        if entry.shape != slot.shape() {
            return Err(Error::ShapeMismatch {
                name: name.to_string(),
                expected: slot.shape().to_vec(),
                found: entry.shape.clone(),
            });
        }
        let width = entry.dtype.width();
        let end = entry.offset + slot.len() * width;
        let bytes = data
            .get(entry.offset..end)
            .ok_or_else(|| Error::Format(format!("tensor `{name}` runs past end of data")))?;
        for (v, chunk) in slot.iter_mut().zip(bytes.chunks_exact(width)) {
            *v = match entry.dtype {
                Dtype::F64 => f64::from_le_bytes(chunk.try_into().expect("8 bytes")),
                Dtype::F32 => f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64,
            };
        }
    }
    Ok(params)
}

pub fn save(params: &ModelParams, path: impl AsRef<Path>, dtype: Dtype) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(params, dtype, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>, expected: Option<&ModelConfig>) -> Result<ModelParams> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(file), expected)
}
