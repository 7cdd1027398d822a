//! Checkpoint file format, all integers little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `CMRLCKPT` |
//! | 4 | u32 format version |
//! | 8 | u64 length of the config blob |
//! | n | UTF-8 TOML blob ([`CheckpointMeta`]) |
//! | 8 | u64 parameter count |
//! | 4 × count | f32 parameters in network order |
//! | 8 | CRC-64/XZ over every preceding byte |

use std::path::Path;

use cmarl_core::{count_params, AgentLandmarkMap, NetConfig, QNetParams};
use crc::{Crc, CRC_64_XZ};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;

pub const MAGIC: &[u8; 8] = b"CMRLCKPT";
pub const VERSION: u32 = 1;

const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);
const PREFIX_LEN: usize = 8 + 4 + 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (this build reads {VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("checksum mismatch: stored {stored:016x}, computed {computed:016x}")]
    ChecksumMismatch { stored: u64, computed: u64 },
    #[error("checkpoint truncated: {0}")]
    Truncated(String),
    #[error("checkpoint holds {found} parameters, its network needs {expected}")]
    ParamCount { expected: usize, found: usize },
    #[error("checkpoint config blob: {0}")]
    Blob(String),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CheckpointError> = std::result::Result<T, E>;

/// Everything besides the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub label: String,
    /// Environment steps taken when the checkpoint was written.
    pub training_step: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_val_error: Option<f64>,
    pub map: AgentLandmarkMap,
    /// Shape of the stored network; may differ from `run.net` for runs of a
    /// multi-network experiment.
    pub net: NetConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub meta: CheckpointMeta,
    pub params: QNetParams,
}

impl Checkpoint {
    pub fn new(meta: CheckpointMeta, params: QNetParams) -> Self {
        Self {
            version: VERSION,
            meta,
            params,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let blob = toml::to_string(&self.meta).expect("checkpoint meta always serializes");
        let mut out = Vec::with_capacity(PREFIX_LEN + blob.len() + 16 + 4 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
        out.extend_from_slice(blob.as_bytes());
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for v in &self.params.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let sum = CRC64.checksum(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    /// Magic and version are checked before the checksum, so a file from a
    /// newer writer reports its version rather than a checksum failure.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..8] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        if bytes.len() < PREFIX_LEN + 16 {
            return Err(CheckpointError::Truncated(format!("{} bytes", bytes.len())));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(CheckpointError::UnsupportedVersion { found: version });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().unwrap());
        let computed = CRC64.checksum(body);
        if stored != computed {
            return Err(CheckpointError::ChecksumMismatch { stored, computed });
        }

        let mut at: usize = 12;
        let mut take = |n: u64, what: &str| -> Result<&[u8]> {
            let n = usize::try_from(n).map_err(|_| CheckpointError::Truncated(what.to_string()))?;
            let end = at
                .checked_add(n)
                .filter(|&e| e <= body.len())
                .ok_or_else(|| CheckpointError::Truncated(what.to_string()))?;
            let s = &body[at..end];
            at = end;
            Ok(s)
        };
        let blob_len = u64::from_le_bytes(take(8, "blob length")?.try_into().unwrap());
        let blob = std::str::from_utf8(take(blob_len, "config blob")?).map_err(|e| CheckpointError::Blob(e.to_string()))?;
        let meta: CheckpointMeta = toml::from_str(blob).map_err(|e| CheckpointError::Blob(e.to_string()))?;
        let count = u64::from_le_bytes(take(8, "parameter count")?.try_into().unwrap());
        let raw = take(count.saturating_mul(4), "parameters")?;
        if at != body.len() {
            return Err(CheckpointError::Truncated(format!(
                "{} unexpected bytes before the checksum",
                body.len() - at
            )));
        }
        let expected = count_params(&meta.net).map_err(|e| CheckpointError::Blob(e.to_string()))?;
        if count as usize != expected {
            return Err(CheckpointError::ParamCount {
                expected,
                found: count as usize,
            });
        }
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            version,
            meta,
            params: QNetParams { values },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }

    /// Multi-line human-readable description.
    pub fn report(&self) -> String {
        let m = &self.meta;
        let best = m.best_val_error.map_or("none".to_string(), |e| format!("{e:.4} mm"));
        format!(
            "format version: {}\nlabel: {}\nagents: {}\nparameters: {}\ntraining step: {}\nbest validation error: {}\nchecksum: ok\n\n[net]\n{}\n[run]\n{}",
            self.version,
            m.label,
            m.map.agents.join(", "),
            self.params.len(),
            m.training_step,
            best,
            toml::to_string(&m.net).unwrap_or_default(),
            m.run.to_toml(),
        )
    }
}
