//! Versioned binary checkpoint container.
//!
//! Layout: magic `SCKP`, major/minor version (little-endian u32), u64 JSON
//! header length, the JSON header, then raw little-endian f64 payload. The
//! header lists every array with its name, shape, and byte offset, plus the
//! architecture config, normalization tag, skeleton, and optional optimizer
//! state for resuming. Loaders reject unknown major versions.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::train::{Adam, TrainReport};
use super::{init_params, SteererConfig, SteererParams};
use crate::skeleton::Skeleton;

const MAGIC: &[u8; 4] = b"SCKP";
const MAJOR: u32 = 1;
const MINOR: u32 = 0;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("not a checkpoint file: bad magic")]
    BadMagic,
    #[error("unsupported checkpoint version {found}.x (this build reads {supported}.x)")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("checkpoint is missing array {0:?}")]
    MissingArray(String),
    #[error("array {name:?} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("payload truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("config error: {0}")]
    Config(#[from] super::SteererError),
}

#[derive(Debug, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    byte_order: String,
    /// Offset into the payload, in bytes.
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    config: SteererConfig,
    normalization: String,
    skeleton: Skeleton,
    skeleton_hash: String,
    arrays: Vec<ArrayEntry>,
    #[serde(default)]
    train_state: Option<TrainState>,
    #[serde(default)]
    report: Option<TrainReport>,
}

/// Optimizer state persisted for resumable training.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainState {
    pub epoch: usize,
    pub adam_step: u64,
    pub learning_rate: f64,
}

/// A loaded checkpoint: parameters plus optional resume state.
pub struct Checkpoint {
    pub params: SteererParams,
    pub skeleton: Skeleton,
    pub report: Option<TrainReport>,
    pub train_state: Option<TrainState>,
    /// Adam moments when the checkpoint was saved mid-training.
    pub adam_moments: Option<(Vec<f64>, Vec<f64>)>,
}

/// Serializes parameters (and optionally optimizer state) to `path`.
pub fn save(
    path: &Path,
    params: &SteererParams,
    skeleton: &Skeleton,
    report: Option<&TrainReport>,
    adam: Option<(&Adam, usize)>,
) -> Result<(), CheckpointError> {
    let mut arrays = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    let mut push = |name: String, shape: Vec<usize>, data: &[f64], payload: &mut Vec<u8>| {
        arrays.push(ArrayEntry {
            name,
            shape,
            dtype: "f64".into(),
            byte_order: "little".into(),
            offset: payload.len(),
        });
        for v in data {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    };
    params.visit(&mut |name, shape, data| {
        push(name.to_string(), shape.to_vec(), data, &mut payload);
    });
    let train_state = adam.map(|(a, epoch)| {
        push("opt.m".into(), vec![a.m.len()], &a.m, &mut payload);
        push("opt.v".into(), vec![a.v.len()], &a.v, &mut payload);
        TrainState {
            epoch,
            adam_step: a.step,
            learning_rate: a.lr,
        }
    });
    let header = Header {
        format: "steercal-checkpoint".into(),
        config: params.config,
        normalization: params.norm_tag.clone(),
        skeleton: skeleton.clone(),
        skeleton_hash: params.skeleton_hash.clone(),
        arrays,
        train_state,
        report: report.cloned(),
    };
    let header_json = serde_json::to_vec(&header)?;

    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(MAGIC)?;
        f.write_all(&MAJOR.to_le_bytes())?;
        f.write_all(&MINOR.to_le_bytes())?;
        f.write_all(&(header_json.len() as u64).to_le_bytes())?;
        f.write_all(&header_json)?;
        f.write_all(&payload)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads a checkpoint, validating version, shapes, and completeness.
pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut f = std::fs::File::open(path)?;
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut u32buf = [0u8; 4];
    f.read_exact(&mut u32buf)?;
    let major = u32::from_le_bytes(u32buf);
    if major != MAJOR {
        return Err(CheckpointError::UnsupportedVersion {
            found: major,
            supported: MAJOR,
        });
    }
    f.read_exact(&mut u32buf)?; // minor: forward-compatible
    let mut u64buf = [0u8; 8];
    f.read_exact(&mut u64buf)?;
    let header_len = u64::from_le_bytes(u64buf) as usize;
    let mut header_json = vec![0u8; header_len];
    f.read_exact(&mut header_json)?;
    let header: Header = serde_json::from_slice(&header_json)?;
    let mut payload = Vec::new();
    f.read_to_end(&mut payload)?;

    let read_array = |name: &str, expected_shape: &[usize]| -> Result<Vec<f64>, CheckpointError> {
        let entry = header
            .arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| CheckpointError::MissingArray(name.to_string()))?;
        if entry.shape != expected_shape {
            return Err(CheckpointError::ShapeMismatch {
                name: name.to_string(),
                expected: expected_shape.to_vec(),
                found: entry.shape.clone(),
            });
        }
        let count: usize = entry.shape.iter().product();
        let need = entry.offset + count * 8;
        if payload.len() < need {
            return Err(CheckpointError::Truncated {
                need,
                have: payload.len(),
            });
        }
        Ok((0..count)
            .map(|i| {
                let o = entry.offset + i * 8;
                f64::from_le_bytes(payload[o..o + 8].try_into().unwrap())
            })
            .collect())
    };

    // Materialize a parameter skeleton, then overwrite every array by name.
    let mut params = init_params(&header.config, &header.skeleton_hash, 0)?;
    params.norm_tag = header.normalization.clone();
    let mut shapes: Vec<(String, Vec<usize>)> = Vec::new();
    params.visit(&mut |name, shape, _| shapes.push((name.to_string(), shape.to_vec())));
    let mut loaded = std::collections::HashMap::new();
    for (name, shape) in &shapes {
        loaded.insert(name.clone(), read_array(name, shape)?);
    }
    params.visit_mut(&mut |name, slice| {
        slice.copy_from_slice(&loaded[name]);
    });

    let adam_moments = if header.train_state.is_some() {
        let n = params.n_params();
        let m = read_array("opt.m", &[n])?;
        let v = read_array("opt.v", &[n])?;
        Some((m, v))
    } else {
        None
    };

    Ok(Checkpoint {
        params,
        skeleton: header.skeleton,
        report: header.report,
        train_state: header.train_state,
        adam_moments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::quadruped_skeleton;

    fn tiny_params() -> (SteererParams, Skeleton) {
        let skeleton = quadruped_skeleton();
        let config = SteererConfig {
            n_joints: 16,
            token_dim: 16,
            n_encoder_layers: 1,
            n_attention_heads: 4,
            feedforward_dim: 32,
            dropout: 0.0,
        };
        (
            init_params(&config, &skeleton.hash(), 42).unwrap(),
            skeleton,
        )
    }

    #[test]
    fn roundtrip_preserves_everything() {
        let (params, skeleton) = tiny_params();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.sckp");
        save(&path, &params, &skeleton, None, None).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(loaded.params.to_flat(), params.to_flat());
        assert_eq!(loaded.params.config, params.config);
        assert_eq!(loaded.params.norm_tag, params.norm_tag);
        assert_eq!(loaded.skeleton, skeleton);
    }

    #[test]
    fn optimizer_state_roundtrips() {
        let (params, skeleton) = tiny_params();
        let mut adam = Adam::new(1e-3, params.n_params());
        adam.step = 17;
        adam.m[3] = 0.5;
        adam.v[9] = 0.25;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.sckp");
        save(&path, &params, &skeleton, None, Some((&adam, 5))).unwrap();
        let loaded = load(&path).unwrap();
        let state = loaded.train_state.unwrap();
        assert_eq!(state.epoch, 5);
        assert_eq!(state.adam_step, 17);
        let (m, v) = loaded.adam_moments.unwrap();
        assert_eq!(m[3], 0.5);
        assert_eq!(v[9], 0.25);
    }

    #[test]
    fn rejects_unknown_major_version() {
        let (params, skeleton) = tiny_params();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.sckp");
        save(&path, &params, &skeleton, None, None).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 99; // bump major version
        std::fs::write(&path, &bytes).unwrap();
        match load(&path) {
            Err(CheckpointError::UnsupportedVersion { found: 99, .. }) => {}
            Err(other) => panic!("expected version error, got {other:?}"),
            Ok(_) => panic!("expected version error, got success"),
        }
    }

    #[test]
    fn rejects_non_checkpoint_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(matches!(load(&path), Err(CheckpointError::BadMagic)));
    }
}
