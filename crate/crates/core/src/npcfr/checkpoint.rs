//! Versioned predictor checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `RFCK` |
//! | 4 | format version (`u32`) |
//! | 4 | header length `n` (`u32`) |
//! | n | UTF-8 JSON header: `format_version`, `architecture`, `arrays` (name, rows, cols), `training` |
//! | 8 per value | parameter arrays as `f64`, row-major, in header order |
//! | 4 | CRC-32 of everything before it |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{LstmLayer, Matrix};
use crate::error::CheckpointError;

use super::network::{Architecture, PredictorParams};

pub const MAGIC: &[u8; 4] = b"RFCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ArrayInfo {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    architecture: Architecture,
    arrays: Vec<ArrayInfo>,
    training: Option<serde_json::Value>,
}

/// Parameters plus an echo of the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: PredictorParams,
    pub training: Option<serde_json::Value>,
}

fn corrupt(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Corrupt(msg.into())
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let named = self.params.named_arrays();
        let header = Header {
            format_version: FORMAT_VERSION,
            architecture: self.params.architecture,
            arrays: named
                .iter()
                .map(|(name, m)| ArrayInfo {
                    name: name.clone(),
                    rows: m.rows,
                    cols: m.cols,
                })
                .collect(),
            training: self.training.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + json.len() + 8 * self.params.num_parameters());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, m) in &named {
            for v in &m.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        if bytes.len() < 16 {
            return Err(corrupt("file shorter than the fixed preamble"));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
        let version = word(4);
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let body_end = bytes.len() - 4;
        if crc32fast::hash(&bytes[..body_end]) != word(body_end) {
            return Err(corrupt("checksum mismatch (truncated or modified file)"));
        }
        let header_len = word(8) as usize;
        let header_end = 12usize
            .checked_add(header_len)
            .filter(|&e| e <= body_end)
            .ok_or_else(|| corrupt("header length exceeds file"))?;
        let header: Header =
            serde_json::from_slice(&bytes[12..header_end]).map_err(|e| corrupt(format!("header: {e}")))?;
        if header.format_version != version {
            return Err(corrupt("header version disagrees with preamble"));
        }
        let arch = header.architecture;
        arch.validate().map_err(corrupt)?;
        let expected = PredictorParams::zeros(arch);
        let expected_named = expected.named_arrays();
        if expected_named.len() != header.arrays.len() {
            return Err(corrupt("array count does not match the architecture"));
        }
        for ((name, m), info) in expected_named.iter().zip(&header.arrays) {
            if *name != info.name || m.rows != info.rows || m.cols != info.cols {
                return Err(corrupt(format!("array `{}` does not match the architecture", info.name)));
            }
        }
        let total: usize = header.arrays.iter().map(|a| a.rows * a.cols).sum();
        if body_end - header_end != 8 * total {
            return Err(corrupt("payload size does not match the header"));
        }
        let mut values = bytes[header_end..body_end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let mut take = |info: &ArrayInfo| {
            Matrix::from_vec(info.rows, info.cols, values.by_ref().take(info.rows * info.cols).collect())
        };
        let mut infos = header.arrays.iter();
        let mut next = || take(infos.next().expect("count checked"));
        let lstm = (0..arch.layers)
            .map(|_| LstmLayer {
                w: next(),
                u: next(),
                b: next(),
            })
            .collect();
        let params = PredictorParams {
            architecture: arch,
            lstm,
            head_w: next(),
            head_b: next(),
            embedding: next(),
        };
        Ok(Checkpoint {
            params,
            training: header.training,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.encode()).map_err(|e| CheckpointError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path).map_err(|e| CheckpointError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        Self::decode(&bytes)
    }
}
