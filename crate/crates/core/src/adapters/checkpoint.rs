//! Adapter checkpoints.
//!
//! Layout: the 8-byte magic `ADPTCKPT`, a little-endian `u32` format
//! version, a little-endian `u32` header length, a UTF-8 JSON header, then
//! every tensor listed in the header as row-major little-endian `f64`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{AdapterConfig, AdapterKind};
use super::model::Adapter;
use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::optim::ParamSet;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ADPTCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: AdapterKind,
    d_in: usize,
    d_latent: usize,
    adapter_config: AdapterConfig,
    config_hash: String,
    fm_checksum: String,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub adapter: Adapter,
    /// Hash of the run configuration that produced the adapter.
    pub config_hash: String,
    /// Checksum of the forecaster the adapter was trained around.
    pub fm_checksum: String,
}

pub fn write_checkpoint<W: Write>(mut w: W, adapter: &Adapter, config_hash: &str, fm_checksum: &str) -> Result<()> {
    let header = Header {
        kind: adapter.kind(),
        d_in: adapter.d_in(),
        d_latent: adapter.d_latent(),
        adapter_config: adapter.config.clone(),
        config_hash: config_hash.to_string(),
        fm_checksum: fm_checksum.to_string(),
        tensors: adapter
            .params()
            .iter()
            .map(|p| TensorEntry { name: p.name.clone(), rows: p.value().rows(), cols: p.value().cols() })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Checkpoint("header too large".into()))?;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&json)?;
    for p in adapter.params().iter() {
        for v in p.value().as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::Checkpoint("file too short for the magic bytes".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not an adapter checkpoint (bad magic)".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})")));
    }
    r.read_exact(&mut word)?;
    let mut json = vec![0u8; u32::from_le_bytes(word) as usize];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json)?;
    if header.kind != header.adapter_config.kind {
        return Err(Error::Checkpoint("header kind disagrees with the adapter config".into()));
    }
    let mut params = ParamSet::new();
    let mut buf = [0u8; 8];
    for t in &header.tensors {
        let mut data = Vec::with_capacity(t.rows * t.cols);
        for _ in 0..t.rows * t.cols {
            r.read_exact(&mut buf).map_err(|_| Error::Checkpoint(format!("truncated data in tensor '{}'", t.name)))?;
            data.push(f64::from_le_bytes(buf));
        }
        params.push(t.name.clone(), Matrix::new(t.rows, t.cols, data)?);
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes after the last tensor", rest.len())));
    }
    let adapter = Adapter::from_params(header.adapter_config, header.d_in, params)?;
    if adapter.d_latent() != header.d_latent {
        return Err(Error::Checkpoint(format!("header d_latent {} disagrees with tensors ({})", header.d_latent, adapter.d_latent())));
    }
    Ok(Checkpoint { adapter, config_hash: header.config_hash, fm_checksum: header.fm_checksum })
}

pub fn save_checkpoint(path: &Path, adapter: &Adapter, config_hash: &str, fm_checksum: &str) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_checkpoint(std::io::BufWriter::new(file), adapter, config_hash, fm_checksum)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(file))
}
