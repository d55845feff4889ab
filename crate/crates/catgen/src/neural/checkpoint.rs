//! Checkpoint format: `manifest.json` (kind + config + tensor table) and
//! one little-endian f32 flat binary per tensor, named after the tensor.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::blocks::Pm;
use super::detector::DetectorModel;
use super::lm::{LMConfig, LanguageModel};

pub const KIND_LM: &str = "lm";
pub const KIND_DETECTOR: &str = "detector";
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("checkpoint is kind {found:?}, expected {expected:?}")]
    WrongKind { expected: String, found: String },
    #[error("tensor {name}: {reason}")]
    Tensor { name: String, reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub kind: String,
    pub config: LMConfig,
    pub tensors: Vec<TensorInfo>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io { path: path.to_path_buf(), source }
}

fn save_params(
    dir: &Path,
    kind: &str,
    config: &LMConfig,
    params: &mut [(String, Pm)],
) -> Result<(), CheckpointError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let tensors: Vec<TensorInfo> = params
        .iter()
        .map(|(name, p)| TensorInfo {
            name: name.clone(),
            shape: p.shape(),
            file: format!("{name}.bin"),
        })
        .collect();
    let manifest =
        CheckpointManifest { kind: kind.to_string(), config: *config, tensors };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CheckpointError::Manifest(e.to_string()))?;
    let mpath = dir.join(MANIFEST);
    fs::write(&mpath, json + "\n").map_err(io_err(&mpath))?;
    for (name, p) in params.iter_mut() {
        let path = dir.join(format!("{name}.bin"));
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        for &v in p.as_slice_mut().iter() {
            w.write_all(&(v as f32).to_le_bytes()).map_err(io_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<CheckpointManifest, CheckpointError> {
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    serde_json::from_str(&text).map_err(|e| CheckpointError::Manifest(e.to_string()))
}

fn load_params(
    dir: &Path,
    manifest: &CheckpointManifest,
    params: &mut [(String, Pm)],
) -> Result<(), CheckpointError> {
    if manifest.tensors.len() != params.len() {
        return Err(CheckpointError::Manifest(format!(
            "manifest lists {} tensors, model has {}",
            manifest.tensors.len(),
            params.len()
        )));
    }
    for (info, (name, p)) in manifest.tensors.iter().zip(params.iter_mut()) {
        if info.name != *name {
            return Err(CheckpointError::Tensor {
                name: info.name.clone(),
                reason: format!("expected tensor {name:?} at this position"),
            });
        }
        if info.shape != p.shape() {
            return Err(CheckpointError::Tensor {
                name: info.name.clone(),
                reason: format!("shape {:?} does not match model shape {:?}", info.shape, p.shape()),
            });
        }
        let path = dir.join(&info.file);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let slice = p.as_slice_mut();
        if bytes.len() != slice.len() * 4 {
            return Err(CheckpointError::Tensor {
                name: info.name.clone(),
                reason: format!(
                    "file holds {} bytes, expected {} for {} f32 values",
                    bytes.len(),
                    slice.len() * 4,
                    slice.len()
                ),
            });
        }
        for (v, chunk) in slice.iter_mut().zip(bytes.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        }
    }
    Ok(())
}

pub fn save_lm(dir: &Path, m: &mut LanguageModel) -> Result<(), CheckpointError> {
    let cfg = m.cfg;
    save_params(dir, KIND_LM, &cfg, &mut m.params_mut())
}

pub fn load_lm(dir: &Path) -> Result<LanguageModel, CheckpointError> {
    let manifest = read_manifest(dir)?;
    if manifest.kind != KIND_LM {
        return Err(CheckpointError::WrongKind {
            expected: KIND_LM.into(),
            found: manifest.kind,
        });
    }
    manifest.config.validate().map_err(|e| CheckpointError::Manifest(e.to_string()))?;
    let mut m = LanguageModel::zeros(&manifest.config);
    load_params(dir, &manifest, &mut m.params_mut())?;
    Ok(m)
}

pub fn save_detector(dir: &Path, d: &mut DetectorModel) -> Result<(), CheckpointError> {
    let cfg = d.cfg;
    save_params(dir, KIND_DETECTOR, &cfg, &mut d.params_mut())
}

pub fn load_detector(dir: &Path) -> Result<DetectorModel, CheckpointError> {
    let manifest = read_manifest(dir)?;
    if manifest.kind != KIND_DETECTOR {
        return Err(CheckpointError::WrongKind {
            expected: KIND_DETECTOR.into(),
            found: manifest.kind,
        });
    }
    manifest.config.validate().map_err(|e| CheckpointError::Manifest(e.to_string()))?;
    let mut d = DetectorModel::zeros(&manifest.config);
    load_params(dir, &manifest, &mut d.params_mut())?;
    Ok(d)
}
