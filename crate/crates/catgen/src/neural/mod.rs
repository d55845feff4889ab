//! Desk-scale transformer language model (generator) and bidirectional
//! encoder classifier (anomaly detector).
//!
//! All math runs in f64 on the CPU; checkpoints store f32. Training,
//! initialization, and sampling are deterministic given seeds.

pub mod blocks;
pub mod checkpoint;
pub mod detector;
pub mod gradcheck;
pub mod lm;

pub use blocks::{Encoder, KvCache, Linear, Pm};
pub use checkpoint::{load_detector, load_lm, save_detector, save_lm, CheckpointError};
pub use detector::{detector_accuracy, detector_score, init_detector, train_detector, DetectorModel};
pub use gradcheck::{grad_check_detector, grad_check_lm};
pub use lm::{
    eos_profile, finetune_lm, init_lm, lm_forward, sample, train_lm, LMConfig, LanguageModel,
    Prompt, SampleParams, SampledSeq,
};

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeuralError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("sequence length {len} exceeds context {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("non-finite loss {value} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, value: f64 },
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("bad prompt: {0}")]
    BadPrompt(String),
    #[error("training set is empty or has no predictable tokens")]
    EmptyTrainingSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 8,
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.batch_size == 0 {
            return Err(NeuralError::BadConfig("batch_size must be positive".into()));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(NeuralError::BadConfig(format!("bad learning rate {}", self.lr)));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(NeuralError::BadConfig(format!("{name} {v} outside [0, 1)")));
            }
        }
        for (name, v) in [("eps", self.eps), ("clip_norm", self.clip_norm)] {
            if v.is_nan() || v <= 0.0 {
                return Err(NeuralError::BadConfig(format!("{name} {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// One per-epoch measurement on one split ("train" or "val").
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub epoch: usize,
    pub split: String,
    pub value: f64,
}

pub fn write_curves_csv(path: &Path, curve: &[CurvePoint]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "epoch,split,value")?;
    for p in curve {
        writeln!(f, "{},{},{}", p.epoch, p.split, p.value)?;
    }
    f.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn train_config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { lr: f64::NAN, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { beta2: 1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { clip_norm: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { lr: 0.0, ..Default::default() }.validate().is_ok());
    }

    #[test]
    fn curves_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        let curve = vec![
            CurvePoint { epoch: 1, split: "train".into(), value: 0.5 },
            CurvePoint { epoch: 1, split: "val".into(), value: 0.625 },
        ];
        write_curves_csv(&path, &curve).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "epoch,split,value\n1,train,0.5\n1,val,0.625\n");
    }
}
