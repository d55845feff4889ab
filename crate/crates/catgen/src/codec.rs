//! Tuple-C token grammar: vocabulary, quantization, encode/decode, bypass.
//!
//! A well-formed sequence is `<bos>`, six numeric lattice tokens (lengths
//! and angles divided by 180), then one (element, x, y, z) group per atom,
//! then `<eos>`: 2 + 6 + 4N tokens for N atoms.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::elements::{self, ElementRecord};
use crate::geometry::{Cell, FracCoord, GeomError, Lattice};
use crate::structio::{assign_tags, Site, Structure, Tag};

pub const BOS: usize = 0;
pub const EOS: usize = 1;
pub const PAD: usize = 2;
pub const N_SPECIALS: usize = 3;
pub const N_NUMERIC: usize = 1001;
pub const VOCAB_SIZE: usize = N_SPECIALS + elements::N_ELEMENTS + N_NUMERIC;

const FIRST_ELEMENT: usize = N_SPECIALS;
const FIRST_NUMERIC: usize = N_SPECIALS + elements::N_ELEMENTS;

/// Default surface band (Angstrom) used when tagging decoded structures.
pub const DECODE_SURFACE_BAND: f64 = 1.0;

/// Specials, the 118 element symbols in atomic-number order, then the
/// numeric tokens "0.000".."1.000"; 1122 ids total.
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(|s| s.as_str())
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

pub fn build_vocab() -> Vocabulary {
    let mut tokens = Vec::with_capacity(VOCAB_SIZE);
    tokens.push("<bos>".to_string());
    tokens.push("<eos>".to_string());
    tokens.push("<pad>".to_string());
    for e in &elements::ELEMENTS {
        tokens.push(e.symbol.to_string());
    }
    for m in 0..N_NUMERIC {
        tokens.push(format!("{}.{:03}", m / 1000, m % 1000));
    }
    let ids = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Vocabulary { tokens, ids }
}

pub fn is_numeric_id(id: usize) -> bool {
    (FIRST_NUMERIC..FIRST_NUMERIC + N_NUMERIC).contains(&id)
}

pub fn is_element_id(id: usize) -> bool {
    (FIRST_ELEMENT..FIRST_NUMERIC).contains(&id)
}

/// Millis value (0..=1000) of a numeric token.
pub fn numeric_millis(id: usize) -> Option<usize> {
    is_numeric_id(id).then(|| id - FIRST_NUMERIC)
}

pub fn numeric_id(millis: usize) -> usize {
    debug_assert!(millis < N_NUMERIC);
    FIRST_NUMERIC + millis
}

pub fn element_of_id(id: usize) -> Option<&'static ElementRecord> {
    is_element_id(id).then(|| &elements::ELEMENTS[id - FIRST_ELEMENT])
}

pub fn element_id(symbol: &str) -> Result<usize, elements::UnknownElement> {
    let rec = elements::element_properties(symbol)?;
    Ok(FIRST_ELEMENT + rec.atomic_number as usize - 1)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodeError {
    #[error("lattice length {name}={value} exceeds 180 A")]
    LatticeTooLarge { name: &'static str, value: f64 },
    #[error("unknown element {0:?}")]
    UnknownElement(String),
    #[error("value {0} outside [0, 1.0005) cannot be quantized")]
    OutOfRange(f64),
}

/// Round-half-up quantization to millis in 0..=1000.
pub fn quantize(value: f64) -> Result<usize, EncodeError> {
    if !value.is_finite() || !(0.0..1.0 + 5e-4).contains(&value) {
        return Err(EncodeError::OutOfRange(value));
    }
    Ok(((value * 1000.0 + 0.5).floor() as usize).min(1000))
}

/// Quantization in coordinate context: "1.000" wraps to "0.000".
pub fn quantize_coord(value: f64) -> Result<usize, EncodeError> {
    let m = quantize(value)?;
    Ok(if m == 1000 { 0 } else { m })
}

/// The six numeric token ids for a lattice (lengths and angles over 180).
pub fn encode_lattice(lat: &Lattice) -> Result<[usize; 6], EncodeError> {
    for (name, v) in [("a", lat.a), ("b", lat.b), ("c", lat.c)] {
        if v > 180.0 {
            return Err(EncodeError::LatticeTooLarge { name, value: v });
        }
    }
    let vals = [lat.a, lat.b, lat.c, lat.alpha, lat.beta, lat.gamma];
    let mut out = [0usize; 6];
    for (slot, v) in out.iter_mut().zip(vals) {
        *slot = numeric_id(quantize(v / 180.0)?);
    }
    Ok(out)
}

pub fn encode(s: &Structure) -> Result<Vec<usize>, EncodeError> {
    let mut out = Vec::with_capacity(2 + 6 + 4 * s.sites.len());
    out.push(BOS);
    out.extend(encode_lattice(&s.lattice)?);
    for site in &s.sites {
        out.push(element_id(&site.element).map_err(|e| EncodeError::UnknownElement(e.0))?);
        for v in site.frac.as_array() {
            out.push(numeric_id(quantize_coord(v)?));
        }
    }
    out.push(EOS);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeErrorKind {
    MissingBos,
    MissingEos,
    TruncatedLattice,
    GrammarViolation,
    NoAtoms,
    DegenerateCell,
}

impl fmt::Display for DecodeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DecodeErrorKind::MissingBos => "missing-bos",
            DecodeErrorKind::MissingEos => "missing-eos",
            DecodeErrorKind::TruncatedLattice => "truncated-lattice",
            DecodeErrorKind::GrammarViolation => "grammar-violation",
            DecodeErrorKind::NoAtoms => "no-atoms",
            DecodeErrorKind::DegenerateCell => "degenerate-cell",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at token {position}")]
pub struct DecodeError {
    pub kind: DecodeErrorKind,
    pub position: usize,
}

impl DecodeError {
    fn new(kind: DecodeErrorKind, position: usize) -> Self {
        DecodeError { kind, position }
    }
}

/// Overlap handling during string-to-structure conversion. `On` silently
/// skips any atom closer than `min_dist` (min-image) to an already accepted
/// atom; skipping happens at conversion time only.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Bypass {
    #[default]
    Off,
    On { min_dist: f64 },
}

#[derive(Debug, Clone)]
pub struct Decoded {
    pub structure: Structure,
    pub skipped: usize,
}

pub fn decode(tokens: &[usize], bypass: Bypass) -> Result<Decoded, DecodeError> {
    use DecodeErrorKind::*;
    if tokens.first() != Some(&BOS) {
        return Err(DecodeError::new(MissingBos, 0));
    }
    let mut vals = [0f64; 6];
    for (k, val) in vals.iter_mut().enumerate() {
        let i = 1 + k;
        match tokens.get(i).copied().and_then(numeric_millis) {
            Some(m) => *val = m as f64 / 1000.0 * 180.0,
            None => return Err(DecodeError::new(TruncatedLattice, i.min(tokens.len()))),
        }
    }
    let lattice = Lattice {
        a: vals[0],
        b: vals[1],
        c: vals[2],
        alpha: vals[3],
        beta: vals[4],
        gamma: vals[5],
    };
    let cell = match Cell::new(&lattice) {
        Ok(c) => c,
        Err(GeomError::BadParameter { name, .. }) => {
            let pos = match name {
                "a" => 1,
                "b" => 2,
                "c" => 3,
                "alpha" => 4,
                "beta" => 5,
                _ => 6,
            };
            return Err(DecodeError::new(DegenerateCell, pos));
        }
        Err(_) => return Err(DecodeError::new(DegenerateCell, 1)),
    };

    let mut atoms: Vec<(usize, FracCoord)> = Vec::new();
    let mut i = 7;
    let eos_pos;
    loop {
        let Some(&tok) = tokens.get(i) else {
            return Err(DecodeError::new(MissingEos, tokens.len()));
        };
        if tok == EOS {
            if i != tokens.len() - 1 {
                return Err(DecodeError::new(GrammarViolation, i + 1));
            }
            eos_pos = i;
            break;
        }
        if !is_element_id(tok) {
            return Err(DecodeError::new(GrammarViolation, i));
        }
        let mut coord = [0f64; 3];
        for (k, c) in coord.iter_mut().enumerate() {
            let j = i + 1 + k;
            match tokens.get(j).copied().and_then(numeric_millis) {
                Some(m) => *c = m as f64 / 1000.0,
                None if j >= tokens.len() => {
                    return Err(DecodeError::new(MissingEos, tokens.len()))
                }
                None => return Err(DecodeError::new(GrammarViolation, j)),
            }
        }
        atoms.push((tok, FracCoord::new(coord[0], coord[1], coord[2])));
        i += 4;
    }
    if atoms.is_empty() {
        return Err(DecodeError::new(NoAtoms, eos_pos));
    }

    let mut accepted: Vec<(usize, FracCoord)> = Vec::new();
    let mut skipped = 0usize;
    for (elem, frac) in atoms {
        let keep = match bypass {
            Bypass::Off => true,
            Bypass::On { min_dist } => accepted
                .iter()
                .all(|(_, q)| cell.min_image_distance(&frac, q) >= min_dist),
        };
        if keep {
            accepted.push((elem, frac));
        } else {
            skipped += 1;
        }
    }

    let sites = accepted
        .into_iter()
        .map(|(id, frac)| Site {
            element: element_of_id(id).expect("element id").symbol.to_string(),
            frac,
            tag: Tag::Bulk,
        })
        .collect();
    let structure = assign_tags(
        &Structure { id: String::new(), lattice, sites },
        DECODE_SURFACE_BAND,
    );
    Ok(Decoded { structure, skipped })
}

#[derive(Debug, Clone)]
pub struct BatchDecode {
    /// (input index, decode result) for every sequence that parsed.
    pub ok: Vec<(usize, Decoded)>,
    pub errors: Vec<(usize, DecodeError)>,
    pub generation_validity: f64,
}

pub fn batch_decode(seqs: &[Vec<usize>], bypass: Bypass) -> BatchDecode {
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for (i, seq) in seqs.iter().enumerate() {
        match decode(seq, bypass) {
            Ok(mut d) => {
                d.structure.id = format!("g{i:05}");
                ok.push((i, d));
            }
            Err(e) => errors.push((i, e)),
        }
    }
    let validity = if seqs.is_empty() { 0.0 } else { ok.len() as f64 / seqs.len() as f64 };
    BatchDecode { ok, errors, generation_validity: validity }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown token {text:?} at column {index}")]
pub struct UnknownToken {
    pub index: usize,
    pub text: String,
}

pub fn seq_to_line(vocab: &Vocabulary, seq: &[usize]) -> String {
    let mut out = String::new();
    for (i, &id) in seq.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(vocab.token(id).unwrap_or("<unk>"));
    }
    out
}

pub fn line_to_seq(vocab: &Vocabulary, line: &str) -> Result<Vec<usize>, UnknownToken> {
    line.split_whitespace()
        .enumerate()
        .map(|(i, t)| {
            vocab.id(t).ok_or_else(|| UnknownToken { index: i, text: t.to_string() })
        })
        .collect()
}
