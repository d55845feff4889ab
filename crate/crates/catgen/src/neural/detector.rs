//! Bidirectional-encoder anomaly detector: a scalar head on the
//! position-0 embedding, squashed to [0, 1]. Classification threshold 0.5.

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::blocks::{clip_grads, init_params, scale_params, Adam, Encoder, Linear, Pm};
use super::lm::LMConfig;
use super::{CurvePoint, NeuralError, TrainConfig};
use crate::datagen::LabeledSeq;

#[derive(Debug, Clone)]
pub struct DetectorModel {
    pub cfg: LMConfig,
    pub enc: Encoder,
    pub head: Linear,
}

impl DetectorModel {
    pub fn zeros(cfg: &LMConfig) -> DetectorModel {
        DetectorModel {
            cfg: *cfg,
            enc: Encoder::zeros(
                cfg.vocab_size,
                cfg.context_len,
                cfg.d_model,
                cfg.d_ff,
                cfg.n_layers,
                cfg.n_heads,
                false,
                cfg.dropout,
            ),
            head: Linear::zeros(cfg.d_model, 1),
        }
    }

    pub fn zeros_like(&self) -> DetectorModel {
        DetectorModel::zeros(&self.cfg)
    }

    pub fn params_mut(&mut self) -> Vec<(String, Pm<'_>)> {
        let mut ps = self.enc.params_mut();
        ps.push(("head.w".into(), Pm::M(&mut self.head.w)));
        ps.push(("head.b".into(), Pm::V(&mut self.head.b)));
        ps
    }
}

pub fn init_detector(cfg: &LMConfig) -> Result<DetectorModel, NeuralError> {
    cfg.validate()?;
    let mut d = DetectorModel::zeros(cfg);
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    init_params(&mut d.params_mut(), &mut rng);
    Ok(d)
}

fn check_seq(seq: &[usize], cfg: &LMConfig) -> Result<(), NeuralError> {
    if seq.is_empty() {
        return Err(NeuralError::BadConfig("empty token sequence".into()));
    }
    if seq.len() > cfg.context_len {
        return Err(NeuralError::SequenceTooLong { len: seq.len(), max: cfg.context_len });
    }
    if let Some(&id) = seq.iter().find(|&&id| id >= cfg.vocab_size) {
        return Err(NeuralError::ConfigMismatch(format!(
            "token id {id} outside vocabulary of size {}",
            cfg.vocab_size
        )));
    }
    Ok(())
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(d: &DetectorModel, tokens: &[usize]) -> Result<f64, NeuralError> {
    check_seq(tokens, &d.cfg)?;
    let (h, _) = d.enc.forward(tokens, None);
    Ok(h.row(0).dot(&d.head.w.column(0)) + d.head.b[0])
}

/// Validity score in [0, 1]; >= 0.5 classifies as valid.
pub fn detector_score(d: &DetectorModel, tokens: &[usize]) -> Result<f64, NeuralError> {
    Ok(sigmoid(logit(d, tokens)?))
}

/// Binary cross-entropy for one labeled sequence (numerically stable,
/// computed from the logit). Gradients of the summed loss go into `grads`.
fn seq_loss(
    d: &DetectorModel,
    item: &LabeledSeq,
    grads: Option<&mut DetectorModel>,
    rng: Option<&mut ChaCha20Rng>,
) -> (f64, bool) {
    let (h, cache) = d.enc.forward(&item.tokens, rng);
    let z = h.row(0).dot(&d.head.w.column(0)) + d.head.b[0];
    let y = item.label as f64;
    let loss = z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
    let correct = (z >= 0.0) == (item.label == 1);
    if let Some(g) = grads {
        let dz = sigmoid(z) - y;
        let h0 = h.slice(s![0..1, ..]).to_owned();
        let dy = Array2::from_elem((1, 1), dz);
        let g_h0 = d.head.backward(&h0, &dy, &mut g.head);
        let mut g_h = Array2::zeros(h.raw_dim());
        g_h.row_mut(0).assign(&g_h0.row(0));
        d.enc.backward(&g_h, &cache, &mut g.enc);
    }
    (loss, correct)
}

pub(crate) fn detector_batch_loss(d: &DetectorModel, batch: &[LabeledSeq]) -> (f64, usize) {
    let mut total = 0.0;
    let mut correct = 0;
    for item in batch {
        let (l, c) = seq_loss(d, item, None, None);
        total += l;
        correct += c as usize;
    }
    (total, correct)
}

pub(crate) fn detector_batch_grads(
    d: &DetectorModel,
    batch: &[LabeledSeq],
    grads: &mut DetectorModel,
) -> f64 {
    let mut total = 0.0;
    for item in batch {
        let (l, _) = seq_loss(d, item, Some(grads), None);
        total += l;
    }
    total
}

/// Fraction of items classified correctly at the 0.5 threshold.
pub fn detector_accuracy(d: &DetectorModel, set: &[LabeledSeq]) -> Result<f64, NeuralError> {
    if set.is_empty() {
        return Err(NeuralError::EmptyTrainingSet);
    }
    for item in set {
        check_seq(&item.tokens, &d.cfg)?;
    }
    let (_, correct) = detector_batch_loss(d, set);
    Ok(correct as f64 / set.len() as f64)
}

/// Minimizes mean BCE with the same batching scheme as `train_lm`.
/// The curve records per-epoch accuracy: "train" is the running accuracy
/// of the epoch's own predictions, "val" an end-of-epoch held-out pass.
pub fn train_detector(
    d: DetectorModel,
    train: &[LabeledSeq],
    val: &[LabeledSeq],
    tc: &TrainConfig,
) -> Result<(DetectorModel, Vec<CurvePoint>), NeuralError> {
    let mut d = d;
    tc.validate()?;
    for item in train.iter().chain(val) {
        check_seq(&item.tokens, &d.cfg)?;
    }
    if tc.epochs == 0 {
        return Ok((d, Vec::new()));
    }
    if train.is_empty() {
        return Err(NeuralError::EmptyTrainingSet);
    }
    let sizes: Vec<usize> = d.params_mut().iter().map(|(_, p)| p.len()).collect();
    let mut adam = Adam::new(tc, &sizes);
    let mut rng = ChaCha20Rng::seed_from_u64(tc.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut curve = Vec::new();
    let use_dropout = d.cfg.dropout > 0.0;
    for epoch in 1..=tc.epochs {
        order.shuffle(&mut rng);
        let mut ep_correct = 0usize;
        for (bi, chunk) in order.chunks(tc.batch_size).enumerate() {
            let mut grads = d.zeros_like();
            let mut btotal = 0.0;
            for &si in chunk {
                let drop_rng = if use_dropout { Some(&mut rng) } else { None };
                let (l, c) = seq_loss(&d, &train[si], Some(&mut grads), drop_rng);
                btotal += l;
                ep_correct += c as usize;
            }
            if !btotal.is_finite() {
                return Err(NeuralError::NonFiniteLoss { epoch, batch: bi, value: btotal });
            }
            let mut gp = grads.params_mut();
            scale_params(&mut gp, 1.0 / chunk.len() as f64);
            clip_grads(&mut gp, tc.clip_norm);
            adam.step(&mut d.params_mut(), &mut gp);
        }
        curve.push(CurvePoint {
            epoch,
            split: "train".into(),
            value: ep_correct as f64 / train.len() as f64,
        });
        if !val.is_empty() {
            let (_, correct) = detector_batch_loss(&d, val);
            curve.push(CurvePoint {
                epoch,
                split: "val".into(),
                value: correct as f64 / val.len() as f64,
            });
        }
    }
    Ok((d, curve))
}
