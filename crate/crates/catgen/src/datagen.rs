//! Dataset corruption (anomaly synthesis) and augmentation.
//!
//! Every per-item random draw comes from its own stream derived from
//! (global seed, item index), so outputs are deterministic and independent
//! of processing order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, EncodeError};
use crate::geometry::{Cell, FracCoord};
use crate::structio::Structure;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatagenError {
    #[error("structure has {0} atoms, need at least 2 to corrupt")]
    TooFewAtoms(usize),
    #[error("need at least 4 structures, got {0}")]
    TooFewStructures(usize),
    #[error("scaled lattice length {0} exceeds 180 A")]
    LatticeTooLarge(f64),
    #[error("augment fractions {0:?} are not a nonnegative partition of 1")]
    BadFractions([f64; 3]),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    None,
    Incomplete,
    ScaleMismatch,
}

/// Token sequence with its binary detector label: 1 = valid, 0 = corrupted.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeq {
    pub tokens: Vec<usize>,
    pub label: u8,
    pub kind: CorruptionKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub translate: f64,
    pub rotate: f64,
    pub unchanged: f64,
    pub seed: u64,
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<(), DatagenError> {
        let f = [self.translate, self.rotate, self.unchanged];
        if f.iter().any(|v| !v.is_finite() || *v < 0.0)
            || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(DatagenError::BadFractions(f));
        }
        Ok(())
    }
}

/// Stream for item `index` under `seed`.
pub fn item_rng(seed: u64, index: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

pub(crate) fn incomplete_removal_count(n: usize, f: f64) -> usize {
    ((f * n as f64).ceil() as usize).clamp(1, n - 1)
}

/// Removes ceil(f*N) atoms, f ~ U[0.2, 0.8], keeping at least one.
pub fn corrupt_incomplete(s: &Structure, rng: &mut impl Rng) -> Result<Structure, DatagenError> {
    let n = s.sites.len();
    if n < 2 {
        return Err(DatagenError::TooFewAtoms(n));
    }
    let f = rng.gen_range(0.2..0.8);
    let count = incomplete_removal_count(n, f);
    let removed = rand::seq::index::sample(rng, n, count);
    let mut keep = vec![true; n];
    for i in removed {
        keep[i] = false;
    }
    let mut out = s.clone();
    let mut it = keep.iter();
    out.sites.retain(|_| *it.next().unwrap());
    Ok(out)
}

/// Multiplies a, b, c by a shared factor k ~ U[1.5, 2.0]; angles and
/// fractional coordinates untouched.
pub fn corrupt_scale(s: &Structure, rng: &mut impl Rng) -> Result<Structure, DatagenError> {
    let k = rng.gen_range(1.5..2.0);
    let mut out = s.clone();
    out.lattice.a *= k;
    out.lattice.b *= k;
    out.lattice.c *= k;
    for l in out.lattice.lengths() {
        if l > 180.0 {
            return Err(DatagenError::LatticeTooLarge(l));
        }
    }
    Ok(out)
}

/// Encodes a half-corrupted detector set: 50% untouched (label 1), 25%
/// incomplete, 25% scale-mismatch (label 0), assigned by a seeded shuffle
/// and emitted in input order.
pub fn build_half_corrupted(
    structs: &[Structure],
    seed: u64,
) -> Result<Vec<LabeledSeq>, DatagenError> {
    let n = structs.len();
    if n < 4 {
        return Err(DatagenError::TooFewStructures(n));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let n_clean = n / 2;
    let n_inc = (n - n_clean).div_ceil(2);
    let mut kind = vec![CorruptionKind::None; n];
    for (rank, &i) in idx.iter().enumerate() {
        kind[i] = if rank < n_clean {
            CorruptionKind::None
        } else if rank < n_clean + n_inc {
            CorruptionKind::Incomplete
        } else {
            CorruptionKind::ScaleMismatch
        };
    }
    let mut out = Vec::with_capacity(n);
    for (i, s) in structs.iter().enumerate() {
        let mut rng = item_rng(seed, i as u64);
        let (tokens, label) = match kind[i] {
            CorruptionKind::None => (codec::encode(s)?, 1),
            CorruptionKind::Incomplete => (codec::encode(&corrupt_incomplete(s, &mut rng)?)?, 0),
            CorruptionKind::ScaleMismatch => (codec::encode(&corrupt_scale(s, &mut rng)?)?, 0),
        };
        out.push(LabeledSeq { tokens, label, kind: kind[i] });
    }
    Ok(out)
}

/// Adds one uniform fractional vector to every site, wrapping into [0, 1).
/// Pairwise min-image distances are preserved exactly.
pub fn augment_translate(s: &Structure, rng: &mut impl Rng) -> Structure {
    let t = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
    let mut out = s.clone();
    for site in &mut out.sites {
        site.frac = FracCoord::new(site.frac.x + t[0], site.frac.y + t[1], site.frac.z + t[2]);
    }
    out
}

pub(crate) fn rotate_by(s: &Structure, theta: f64) -> Structure {
    let Ok(cell) = Cell::new(&s.lattice) else {
        return s.clone();
    };
    let center = [
        0.5 * (cell.m[0][0] + cell.m[1][0]),
        0.5 * (cell.m[0][1] + cell.m[1][1]),
    ];
    let (sin, cos) = theta.sin_cos();
    let mut out = s.clone();
    for site in &mut out.sites {
        let p = cell.to_cart(&site.frac);
        let dx = p[0] - center[0];
        let dy = p[1] - center[1];
        let rotated = [
            center[0] + cos * dx - sin * dy,
            center[1] + sin * dx + cos * dy,
            p[2],
        ];
        site.frac = cell.cart_to_frac(rotated);
    }
    out
}

/// Rotates Cartesian coordinates about the z-parallel axis through the
/// in-plane cell midpoint (fractional (0.5, 0.5)) by theta ~ U[0, 2pi).
pub fn augment_rotate(s: &Structure, rng: &mut impl Rng) -> Structure {
    rotate_by(s, rng.gen_range(0.0..std::f64::consts::TAU))
}

/// Uniformly shuffles site order; breaks the canonical-order invariant on
/// purpose (ablation use only).
pub fn augment_permute(s: &Structure, rng: &mut impl Rng) -> Structure {
    let mut out = s.clone();
    out.sites.shuffle(rng);
    out
}

/// Applies the requested partition: round(translate*n) items translated,
/// round(rotate*n) rotated, the rest unchanged, assignment seeded.
pub fn build_augmented(structs: &[Structure], spec: &AugmentSpec) -> Result<Vec<Structure>, DatagenError> {
    spec.validate()?;
    let n = structs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha20Rng::seed_from_u64(spec.seed));
    let n_t = ((spec.translate * n as f64).round() as usize).min(n);
    let n_r = ((spec.rotate * n as f64).round() as usize).min(n - n_t);
    let mut action = vec![2u8; n];
    for (rank, &i) in idx.iter().enumerate() {
        action[i] = if rank < n_t {
            0
        } else if rank < n_t + n_r {
            1
        } else {
            2
        };
    }
    Ok(structs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = item_rng(spec.seed, i as u64);
            match action[i] {
                0 => augment_translate(s, &mut rng),
                1 => augment_rotate(s, &mut rng),
                _ => s.clone(),
            }
        })
        .collect())
}

/// Serializes labeled sequences as "label<TAB>token token ...".
pub fn labeled_to_line(vocab: &codec::Vocabulary, l: &LabeledSeq) -> String {
    format!("{}\t{}", l.label, codec::seq_to_line(vocab, &l.tokens))
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("bad labeled line: {0}")]
pub struct LabeledLineError(pub String);

pub fn line_to_labeled(
    vocab: &codec::Vocabulary,
    line: &str,
) -> Result<LabeledSeq, LabeledLineError> {
    let (label, rest) = line
        .split_once('\t')
        .ok_or_else(|| LabeledLineError("missing tab separator".into()))?;
    let label: u8 = match label {
        "0" => 0,
        "1" => 1,
        other => return Err(LabeledLineError(format!("label {other:?} not 0 or 1"))),
    };
    let tokens = codec::line_to_seq(vocab, rest).map_err(|e| LabeledLineError(e.to_string()))?;
    let kind = if label == 1 { CorruptionKind::None } else { CorruptionKind::Incomplete };
    Ok(LabeledSeq { tokens, label, kind })
}
