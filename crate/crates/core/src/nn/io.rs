//! Binary model files.
//!
//! Layout, all integers and reals little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `CVSC` |
//! | 1     | format version |
//! | 36    | config: nine `u32` (input_len, input_width, conv1_filters, conv1_width, pool_window, conv2_filters, conv2_width, dense1_units, classes) |
//! | 8     | token table fingerprint (`u64`) |
//! | 4·n   | weights as `f32`: conv1 kernels, conv1 biases, conv2 kernels, conv2 biases, dense1 matrix, dense1 biases, dense2 matrix, dense2 biases |
//! | 4     | CRC-32 of every preceding byte |

use std::path::Path;

use super::model::{Model, ModelConfig, Params};
use super::NnError;

pub const MAGIC: &[u8; 4] = b"CVSC";
pub const FORMAT_VERSION: u8 = 1;

const HEADER_LEN: usize = 4 + 1 + 9 * 4 + 8;

impl Model<f32> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.params.len() + 4);
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        for v in [
            c.input_len,
            c.input_width,
            c.conv1_filters,
            c.conv1_width,
            c.pool_window,
            c.conv2_filters,
            c.conv2_width,
            c.dense1_units,
            c.classes,
        ] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.table_fingerprint.to_le_bytes());
        for t in self.params.tensors() {
            for w in t {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let corrupt = |m: &str| NnError::CorruptFile(m.to_string());
        if bytes.len() < HEADER_LEN + 4 {
            return Err(corrupt("file too short"));
        }
        if &bytes[..4] != MAGIC {
            return Err(corrupt("bad magic bytes"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(corrupt("checksum mismatch"));
        }
        if body[4] != FORMAT_VERSION {
            return Err(NnError::VersionMismatch {
                found: body[4],
                expected: FORMAT_VERSION,
            });
        }
        let u32_at = |i: usize| u32::from_le_bytes(body[5 + 4 * i..9 + 4 * i].try_into().unwrap()) as usize;
        let config = ModelConfig {
            input_len: u32_at(0),
            input_width: u32_at(1),
            conv1_filters: u32_at(2),
            conv1_width: u32_at(3),
            pool_window: u32_at(4),
            conv2_filters: u32_at(5),
            conv2_width: u32_at(6),
            dense1_units: u32_at(7),
            classes: u32_at(8),
        };
        let fingerprint = u64::from_le_bytes(body[41..49].try_into().unwrap());
        let mut params = Params::<f32>::zeros(&config)
            .map_err(|e| NnError::CorruptFile(format!("stored config is invalid: {e}")))?;
        let weights = &body[HEADER_LEN..];
        if weights.len() != 4 * params.len() {
            return Err(corrupt("weight block does not match the stored config"));
        }
        let mut values = weights
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()));
        for t in params.tensors_mut() {
            for w in t.iter_mut() {
                *w = values.next().expect("length checked above");
            }
        }
        Model::from_params(config, params, fingerprint)
    }
}

pub fn save_model(model: &Model<f32>, path: &Path) -> Result<(), NnError> {
    std::fs::write(path, model.to_bytes())?;
    Ok(())
}

/// Loads and verifies a model file. The table fingerprint is checked later,
/// against every input the model is asked to score.
pub fn load_model(path: &Path) -> Result<Model<f32>, NnError> {
    Model::from_bytes(&std::fs::read(path)?)
}
