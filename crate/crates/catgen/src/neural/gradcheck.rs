//! Central-finite-difference gradient verification for both model types.
//!
//! The loss under test is the batch-mean loss (cross-entropy per
//! prediction for the LM, BCE per sequence for the detector), matching
//! what one optimizer step sees before clipping.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::detector::{detector_batch_grads, detector_batch_loss, DetectorModel};
use super::lm::{lm_batch_grads, lm_batch_loss, LanguageModel};
use super::NeuralError;
use crate::datagen::LabeledSeq;

const MIN_SAMPLES: usize = 200;
const GRADCHECK_SEED: u64 = 0x5EED;

fn check_eps(eps: f64) -> Result<(), NeuralError> {
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(NeuralError::BadConfig(format!("eps {eps} outside [1e-6, 1e-3]")));
    }
    Ok(())
}

/// Picks at least `MIN_SAMPLES` flat parameter coordinates (all of them
/// when the model is smaller) and returns (tensor index, element index).
fn pick_coords(sizes: &[usize], seed: u64) -> Vec<(usize, usize)> {
    let total: usize = sizes.iter().sum();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let flats: Vec<usize> = if total <= MIN_SAMPLES {
        (0..total).collect()
    } else {
        rand::seq::index::sample(&mut rng, total, MIN_SAMPLES).into_vec()
    };
    flats
        .into_iter()
        .map(|mut f| {
            for (ti, &n) in sizes.iter().enumerate() {
                if f < n {
                    return (ti, f);
                }
                f -= n;
            }
            unreachable!("flat index out of range")
        })
        .collect()
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

pub(crate) fn lm_max_rel_err(
    m: &mut LanguageModel,
    grads: &mut LanguageModel,
    batch: &[Vec<usize>],
    eps: f64,
    seed: u64,
) -> f64 {
    let sizes: Vec<usize> = m.params_mut().iter().map(|(_, p)| p.len()).collect();
    let mut worst = 0.0f64;
    for (ti, ei) in pick_coords(&sizes, seed) {
        let ga = grads.params_mut()[ti].1.as_slice_mut()[ei];
        let orig = m.params_mut()[ti].1.as_slice_mut()[ei];
        m.params_mut()[ti].1.as_slice_mut()[ei] = orig + eps;
        let (lp, np) = lm_batch_loss(m, batch);
        m.params_mut()[ti].1.as_slice_mut()[ei] = orig - eps;
        let (lm_, nm) = lm_batch_loss(m, batch);
        m.params_mut()[ti].1.as_slice_mut()[ei] = orig;
        let numeric = (lp / np as f64 - lm_ / nm as f64) / (2.0 * eps);
        worst = worst.max(rel_err(ga, numeric));
    }
    worst
}

/// Max relative error between analytic and numeric gradients over a
/// random subsample of at least 200 weights.
pub fn grad_check_lm(
    m: &mut LanguageModel,
    batch: &[Vec<usize>],
    eps: f64,
) -> Result<f64, NeuralError> {
    check_eps(eps)?;
    let mut grads = m.zeros_like();
    let (_, n) = lm_batch_grads(m, batch, &mut grads);
    if n == 0 {
        return Err(NeuralError::EmptyTrainingSet);
    }
    let mut gp = grads.params_mut();
    super::blocks::scale_params(&mut gp, 1.0 / n as f64);
    drop(gp);
    Ok(lm_max_rel_err(m, &mut grads, batch, eps, GRADCHECK_SEED))
}

pub(crate) fn detector_max_rel_err(
    d: &mut DetectorModel,
    grads: &mut DetectorModel,
    batch: &[LabeledSeq],
    eps: f64,
    seed: u64,
) -> f64 {
    let sizes: Vec<usize> = d.params_mut().iter().map(|(_, p)| p.len()).collect();
    let n = batch.len() as f64;
    let mut worst = 0.0f64;
    for (ti, ei) in pick_coords(&sizes, seed) {
        let ga = grads.params_mut()[ti].1.as_slice_mut()[ei];
        let orig = d.params_mut()[ti].1.as_slice_mut()[ei];
        d.params_mut()[ti].1.as_slice_mut()[ei] = orig + eps;
        let (lp, _) = detector_batch_loss(d, batch);
        d.params_mut()[ti].1.as_slice_mut()[ei] = orig - eps;
        let (lm_, _) = detector_batch_loss(d, batch);
        d.params_mut()[ti].1.as_slice_mut()[ei] = orig;
        let numeric = (lp / n - lm_ / n) / (2.0 * eps);
        worst = worst.max(rel_err(ga, numeric));
    }
    worst
}

pub fn grad_check_detector(
    d: &mut DetectorModel,
    batch: &[LabeledSeq],
    eps: f64,
) -> Result<f64, NeuralError> {
    check_eps(eps)?;
    if batch.is_empty() {
        return Err(NeuralError::EmptyTrainingSet);
    }
    let mut grads = d.zeros_like();
    detector_batch_grads(d, batch, &mut grads);
    let mut gp = grads.params_mut();
    super::blocks::scale_params(&mut gp, 1.0 / batch.len() as f64);
    drop(gp);
    Ok(detector_max_rel_err(d, &mut grads, batch, eps, GRADCHECK_SEED))
}
