//! Binary checkpoint container shared by the encoder and the CoLES baseline.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   8 bytes  "TXNFMCKP"
//! version u32      = 1
//! hlen    u64      length of the JSON header
//! header  hlen bytes of UTF-8 JSON (CheckpointHeader)
//! values  n_values f32
//! m, v    n_values f32 each, present iff header.has_moments
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ParamGroup;
use crate::synthgen::Provenance;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TXNFMCKP";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    /// `encoder` or `coles`.
    pub kind: String,
    pub step: u64,
    pub seed: u64,
    /// Seeds and checkpoint hashes this run descends from, oldest first.
    pub lineage: Vec<String>,
    pub provenance: Option<Provenance>,
    /// Serialized model config of the owning module.
    pub model: serde_json::Value,
    pub layout: Vec<ParamGroup>,
    pub n_values: usize,
    pub has_moments: bool,
    /// Hex sha256 of the little-endian payload that follows the header.
    pub payload_sha256: String,
    #[serde(default)]
    pub extra: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub values: Vec<f32>,
    /// Adam first and second moments.
    pub moments: Option<(Vec<f32>, Vec<f32>)>,
}

fn payload(values: &[f32], moments: &Option<(Vec<f32>, Vec<f32>)>) -> Vec<u8> {
    let extra = moments.as_ref().map_or(0, |(m, v)| m.len() + v.len());
    let mut out = Vec::with_capacity((values.len() + extra) * 4);
    let mut put = |xs: &[f32]| {
        for x in xs {
            out.extend_from_slice(&x.to_le_bytes());
        }
    };
    put(values);
    if let Some((m, v)) = moments {
        put(m);
        put(v);
    }
    out
}

impl Checkpoint {
    /// Builds a checkpoint, filling in the payload bookkeeping fields.
    pub fn new(mut header: CheckpointHeader, values: Vec<f32>, moments: Option<(Vec<f32>, Vec<f32>)>) -> Result<Self> {
        if let Some((m, v)) = &moments {
            if m.len() != values.len() || v.len() != values.len() {
                return Err(Error::ShapeMismatch {
                    expected: values.len(),
                    actual: m.len().min(v.len()),
                });
            }
        }
        header.n_values = values.len();
        header.has_moments = moments.is_some();
        header.payload_sha256 = crate::util::sha256_hex(&payload(&values, &moments));
        Ok(Self { header, values, moments })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let header = serde_json::to_vec(&self.header)?;
        let body = payload(&self.values, &self.moments);
        let mut bytes = Vec::with_capacity(20 + header.len() + body.len());
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
        bytes.extend_from_slice(&header);
        bytes.extend_from_slice(&body);
        // Write-then-rename so a crash never leaves a truncated checkpoint.
        let tmp = path.with_extension("tmp");
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let corrupt = |reason: String| Error::CorruptFile {
            path: path.to_path_buf(),
            reason,
        };
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(corrupt("bad magic".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body_start = 20usize.checked_add(hlen).filter(|&e| e <= bytes.len()).ok_or_else(|| corrupt("truncated header".into()))?;
        let header: CheckpointHeader =
            serde_json::from_slice(&bytes[20..body_start]).map_err(|e| corrupt(format!("header: {e}")))?;
        let body = &bytes[body_start..];
        let n = header.n_values;
        let blocks = if header.has_moments { 3 } else { 1 };
        if body.len() != n * blocks * 4 {
            return Err(corrupt(format!("payload has {} bytes, expected {}", body.len(), n * blocks * 4)));
        }
        if crate::util::sha256_hex(body) != header.payload_sha256 {
            return Err(corrupt("payload checksum mismatch".into()));
        }
        let floats = |b: &[u8]| -> Vec<f32> {
            b.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect()
        };
        let values = floats(&body[..n * 4]);
        let moments = header
            .has_moments
            .then(|| (floats(&body[n * 4..n * 8]), floats(&body[n * 8..])));
        Ok(Self { header, values, moments })
    }
}
