//! Structure data model, JSON-Lines dataset I/O, tag assignment, splits.
//!
//! Dataset format: one JSON object per line,
//! `{"id":"s0001","lattice":{"a":10.0,...},"sites":[{"element":"Pt","frac":[0.0,0.0,0.25],"tag":"bulk"},...]}`.
//! Unknown keys are ignored and `tag` defaults to `bulk`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elements;
use crate::geometry::{Cell, FracCoord, Lattice};

pub use crate::elements::{element_properties, ElementRecord, UnknownElement};

#[derive(Debug, Error)]
pub enum StructIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: unknown element {symbol:?}")]
    UnknownElement { line: usize, symbol: String },
    #[error("split ratios {0:?} do not sum to 1")]
    BadRatios([f64; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Bulk,
    Surface,
    Adsorbate,
}

impl Tag {
    fn rank(self) -> u8 {
        match self {
            Tag::Bulk => 0,
            Tag::Surface => 1,
            Tag::Adsorbate => 2,
        }
    }
}

fn default_tag() -> Tag {
    Tag::Bulk
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub element: String,
    pub frac: FracCoord,
    #[serde(default = "default_tag")]
    pub tag: Tag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Structure {
    pub id: String,
    pub lattice: Lattice,
    pub sites: Vec<Site>,
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<Structure>,
    pub val: Vec<Structure>,
    pub test: Vec<Structure>,
    pub seed: u64,
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<Structure>, StructIoError> {
    let file = File::open(path.as_ref())?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Structure = serde_json::from_str(&line).map_err(|e| StructIoError::Parse {
            line: lineno,
            reason: e.to_string(),
        })?;
        s.lattice.validate().map_err(|e| StructIoError::Parse {
            line: lineno,
            reason: e.to_string(),
        })?;
        for site in &s.sites {
            if elements::element_properties(&site.element).is_err() {
                return Err(StructIoError::UnknownElement {
                    line: lineno,
                    symbol: site.element.clone(),
                });
            }
            let f = site.frac.as_array();
            if f.iter().any(|v| !v.is_finite()) {
                return Err(StructIoError::Parse {
                    line: lineno,
                    reason: format!("non-finite coordinate in {:?}", s.id),
                });
            }
        }
        out.push(s);
    }
    Ok(out)
}

pub fn write_dataset(structs: &[Structure], path: impl AsRef<Path>) -> Result<(), StructIoError> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    for s in structs {
        serde_json::to_writer(&mut w, s).map_err(|e| StructIoError::Parse {
            line: 0,
            reason: e.to_string(),
        })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Stable-sorts sites into the canonical bulk, surface, adsorbate order.
pub fn canonicalize(s: &Structure) -> Structure {
    let mut out = s.clone();
    out.sites.sort_by_key(|site| site.tag.rank());
    out
}

/// Retags every site from geometry: adsorbate-species atoms strictly above
/// every non-adsorbate-species atom become `Adsorbate`; of the rest, atoms
/// with Cartesian z within `surface_band` of the remaining maximum become
/// `Surface`, all others `Bulk`.
pub fn assign_tags(s: &Structure, surface_band: f64) -> Structure {
    let cell = match Cell::new(&s.lattice) {
        Ok(c) => c,
        Err(_) => return s.clone(),
    };
    let z: Vec<f64> = s.sites.iter().map(|site| cell.to_cart(&site.frac)[2]).collect();
    let species_ads: Vec<bool> = s
        .sites
        .iter()
        .map(|site| {
            elements::element_properties(&site.element)
                .map(|r| r.is_adsorbate_species)
                .unwrap_or(false)
        })
        .collect();
    let host_max_z = (0..s.sites.len())
        .filter(|&i| !species_ads[i])
        .map(|i| z[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let is_adsorbate: Vec<bool> = (0..s.sites.len())
        .map(|i| species_ads[i] && z[i] > host_max_z)
        .collect();
    let rest_max_z = (0..s.sites.len())
        .filter(|&i| !is_adsorbate[i])
        .map(|i| z[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out = s.clone();
    for (i, site) in out.sites.iter_mut().enumerate() {
        site.tag = if is_adsorbate[i] {
            Tag::Adsorbate
        } else if rest_max_z - z[i] <= surface_band {
            Tag::Surface
        } else {
            Tag::Bulk
        };
    }
    out
}

pub fn split_dataset(
    structs: &[Structure],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit, StructIoError> {
    let r = [ratios.0, ratios.1, ratios.2];
    if r.iter().any(|v| !v.is_finite() || *v < 0.0) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(StructIoError::BadRatios(r));
    }
    let n = structs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_train = ((r[0] * n as f64).round() as usize).min(n);
    let n_val = ((r[1] * n as f64).round() as usize).min(n - n_train);
    let take = |slice: &[usize]| slice.iter().map(|&i| structs[i].clone()).collect();
    Ok(DatasetSplit {
        train: take(&idx[..n_train]),
        val: take(&idx[n_train..n_train + n_val]),
        test: take(&idx[n_train + n_val..]),
        seed,
    })
}
