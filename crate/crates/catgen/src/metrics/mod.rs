//! Evaluation metrics: validity suite, coverage, property EMD, diversity,
//! 2e-ORR rule validity, and descriptor screening.

pub mod fingerprint;
pub mod matcher;
pub mod report;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{cell_volume, Cell, GeomError};
use crate::neural::{detector_score, DetectorModel};
use crate::structio::{Structure, Tag};

pub use fingerprint::{calibrate_cutoffs, composition_fp, fp_distance, structure_fp, FP_LEN};
pub use matcher::{structures_match, MatchTolerances};
pub use report::{evaluate, render_table, EvalOptions, EvaluationReport, GenSample};

/// Minimum min-image interatomic distance for structural validity, Angstrom.
pub const MIN_INTERATOMIC: f64 = 0.5;
/// Minimum cell volume for structural validity, cubic Angstrom.
pub const MIN_VOLUME: f64 = 0.1;

/// 2e-ORR screening window on dG_OOH, eV (exclusive bounds).
pub const OOH_LOWER: f64 = 3.22;
pub const OOH_UPPER: f64 = 5.22;
/// Selectivity threshold on dG_O, eV (exclusive).
pub const O_LOWER: f64 = 3.52;
/// Ideal dG_OOH and the half-width of the near-optimal band, eV.
pub const OOH_IDEAL: f64 = 4.22;
pub const NEAR_OPTIMAL_WINDOW: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("structure {0:?} has no reaction adsorbate")]
    NoAdsorbate(String),
    #[error("unknown element {0:?}")]
    UnknownElement(String),
    #[error("element {0:?} appears in more than one role set")]
    RoleOverlap(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// A count over a denominator, with the quotient precomputed for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub count: usize,
    pub total: usize,
    pub value: f64,
}

impl Ratio {
    pub fn new(count: usize, total: usize) -> Self {
        let value = if total == 0 {
            0.0
        } else {
            count as f64 / total as f64
        };
        Ratio { count, total, value }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub generation: Ratio,
    pub structural: Ratio,
    pub catalyst: Option<Ratio>,
    pub composition: Option<Ratio>,
    pub adsorption: Option<Ratio>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub recall: f64,
    pub precision: f64,
    pub struct_cutoff: f64,
    pub comp_cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub emd_density: f64,
    pub emd_nel: f64,
    /// Generated structures actually compared, after sub-sampling.
    pub sample_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub uniqueness: f64,
    pub novelty: Option<f64>,
}

/// Element role sets for the 2e-ORR rule checks. The three sets must be
/// pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoleConfig {
    pub oxophilic: BTreeSet<String>,
    pub oxophobic: BTreeSet<String>,
    pub adsorbate_species: BTreeSet<String>,
    /// Max adsorbate-host bond length, Angstrom.
    pub bond_cutoff: f64,
    /// Min second-to-first neighbor distance ratio for an on-top site.
    pub ontop_ratio: f64,
}

fn names(list: &[&str]) -> BTreeSet<String> {
    list.iter().map(|s| s.to_string()).collect()
}

impl Default for RoleConfig {
    fn default() -> Self {
        RoleConfig {
            oxophilic: names(&["Ti", "V", "Nb", "Ta", "Mo", "W"]),
            oxophobic: names(&["Au", "Ag", "Cu", "Pd", "Pt", "Zn"]),
            adsorbate_species: names(&["O"]),
            bond_cutoff: 2.6,
            ontop_ratio: 1.2,
        }
    }
}

impl RoleConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let pairs = [
            (&self.oxophilic, &self.oxophobic),
            (&self.oxophilic, &self.adsorbate_species),
            (&self.oxophobic, &self.adsorbate_species),
        ];
        for (a, b) in pairs {
            if let Some(el) = a.intersection(b).next() {
                return Err(MetricsError::RoleOverlap(el.clone()));
            }
        }
        Ok(())
    }
}

/// Cell volume >= 0.1 A^3 and every min-image pair distance >= 0.5 A.
/// Single-atom structures pass the distance clause vacuously; empty or
/// degenerate structures fail.
pub fn structural_validity(s: &Structure) -> bool {
    if s.sites.is_empty() {
        return false;
    }
    let Ok(cell) = Cell::new(&s.lattice) else {
        return false;
    };
    match cell_volume(&s.lattice) {
        Ok(v) if v >= MIN_VOLUME => {}
        _ => return false,
    }
    for i in 0..s.sites.len() {
        for j in (i + 1)..s.sites.len() {
            if cell.min_image_distance(&s.sites[i].frac, &s.sites[j].frac) < MIN_INTERATOMIC {
                return false;
            }
        }
    }
    true
}

/// True when the detector scores the sequence at or above 0.5. Sequences the
/// detector cannot score (e.g. longer than its context) count as invalid.
fn detector_pass(d: &DetectorModel, tokens: &[usize]) -> bool {
    detector_score(d, tokens).map(|p| p >= 0.5).unwrap_or(false)
}

/// Fraction of sequences the detector accepts as valid.
pub fn catalyst_validity(
    d: &DetectorModel,
    seqs: &[Vec<usize>],
) -> Result<Ratio, MetricsError> {
    if seqs.is_empty() {
        return Err(MetricsError::EmptyInput(
            "catalyst validity needs at least one sequence",
        ));
    }
    let count = seqs.iter().filter(|t| detector_pass(d, t)).count();
    Ok(Ratio::new(count, seqs.len()))
}

pub(crate) struct FpSet {
    structural: Vec<Vec<f64>>,
    composition: Vec<Vec<f64>>,
}

impl FpSet {
    pub(crate) fn build(structs: &[Structure]) -> Result<Self, MetricsError> {
        Ok(FpSet {
            structural: structs.iter().map(structure_fp).collect(),
            composition: structs
                .iter()
                .map(composition_fp)
                .collect::<Result<_, _>>()?,
        })
    }

    fn close(&self, i: usize, other: &FpSet, j: usize, cutoffs: (f64, f64)) -> bool {
        fp_distance(&self.structural[i], &other.structural[j]) <= cutoffs.0
            && fp_distance(&self.composition[i], &other.composition[j]) <= cutoffs.1
    }
}

/// Nearest-neighbor recall and precision under joint fingerprint cutoffs.
/// A pair counts as close only when both the structure and the composition
/// fingerprints fall within their cutoffs.
pub fn coverage(
    gen: &[Structure],
    gt: &[Structure],
    cutoffs: (f64, f64),
) -> Result<CoverageReport, MetricsError> {
    if gen.is_empty() {
        return Err(MetricsError::EmptyInput("coverage needs generated structures"));
    }
    if gt.is_empty() {
        return Err(MetricsError::EmptyInput("coverage needs reference structures"));
    }
    let gen_fp = FpSet::build(gen)?;
    let gt_fp = FpSet::build(gt)?;
    let covered = (0..gt.len())
        .filter(|&j| (0..gen.len()).any(|i| gen_fp.close(i, &gt_fp, j, cutoffs)))
        .count();
    let precise = (0..gen.len())
        .filter(|&i| (0..gt.len()).any(|j| gen_fp.close(i, &gt_fp, j, cutoffs)))
        .count();
    Ok(CoverageReport {
        recall: covered as f64 / gt.len() as f64,
        precision: precise as f64 / gen.len() as f64,
        struct_cutoff: cutoffs.0,
        comp_cutoff: cutoffs.1,
    })
}

/// Exact 1D earth mover's distance between two samples: the integral of the
/// absolute difference of their empirical CDFs. Equal-size inputs reduce to
/// the mean absolute difference of the sorted samples.
pub fn emd1d(xs: &[f64], ys: &[f64]) -> Result<f64, MetricsError> {
    if xs.is_empty() || ys.is_empty() {
        return Err(MetricsError::EmptyInput("emd1d needs non-empty samples"));
    }
    let mut xs = xs.to_vec();
    let mut ys = ys.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    if xs.len() == ys.len() {
        let n = xs.len() as f64;
        return Ok(xs.iter().zip(&ys).map(|(x, y)| (x - y).abs()).sum::<f64>() / n);
    }
    let mut points: Vec<f64> = xs.iter().chain(ys.iter()).copied().collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut ix = 0;
    let mut iy = 0;
    let mut total = 0.0;
    for w in points.windows(2) {
        while ix < xs.len() && xs[ix] <= w[0] {
            ix += 1;
        }
        while iy < ys.len() && ys[iy] <= w[0] {
            iy += 1;
        }
        let fx = ix as f64 / xs.len() as f64;
        let fy = iy as f64 / ys.len() as f64;
        total += (fx - fy).abs() * (w[1] - w[0]);
    }
    Ok(total)
}

fn element_count(s: &Structure) -> f64 {
    let set: BTreeSet<&str> = s.sites.iter().map(|x| x.element.as_str()).collect();
    set.len() as f64
}

/// EMD between generated and reference marginals of mass density and of the
/// per-structure distinct-element count.
pub fn property_emd(
    gen: &[Structure],
    gt: &[Structure],
) -> Result<PropertyReport, MetricsError> {
    if gen.is_empty() || gt.is_empty() {
        return Err(MetricsError::EmptyInput("property EMD needs non-empty sets"));
    }
    let gen_rho = gen
        .iter()
        .map(crate::geometry::density)
        .collect::<Result<Vec<_>, _>>()?;
    let gt_rho = gt
        .iter()
        .map(crate::geometry::density)
        .collect::<Result<Vec<_>, _>>()?;
    let gen_nel: Vec<f64> = gen.iter().map(element_count).collect();
    let gt_nel: Vec<f64> = gt.iter().map(element_count).collect();
    Ok(PropertyReport {
        emd_density: emd1d(&gen_rho, &gt_rho)?,
        emd_nel: emd1d(&gen_nel, &gt_nel)?,
        sample_size: gen.len(),
    })
}

/// Fraction of structures that are first of their equivalence group under
/// greedy first-seen matching.
pub fn uniqueness(gen: &[Structure], tol: &MatchTolerances) -> Result<f64, MetricsError> {
    if gen.is_empty() {
        return Err(MetricsError::EmptyInput("uniqueness needs structures"));
    }
    let mut reps: Vec<&Structure> = Vec::new();
    for s in gen {
        if !reps.iter().any(|r| structures_match(s, r, tol)) {
            reps.push(s);
        }
    }
    Ok(reps.len() as f64 / gen.len() as f64)
}

/// Fraction of structures matching nothing in the training set. An empty
/// training set makes everything novel.
pub fn novelty(
    gen: &[Structure],
    train: &[Structure],
    tol: &MatchTolerances,
) -> Result<f64, MetricsError> {
    if gen.is_empty() {
        return Err(MetricsError::EmptyInput("novelty needs structures"));
    }
    let novel = gen
        .iter()
        .filter(|s| !train.iter().any(|t| structures_match(s, t, tol)))
        .count();
    Ok(novel as f64 / gen.len() as f64)
}

/// Exactly two distinct elements on the non-adsorbate sites, one oxophilic
/// and one oxophobic.
pub fn composition_validity(s: &Structure, roles: &RoleConfig) -> bool {
    let host: BTreeSet<&str> = s
        .sites
        .iter()
        .filter(|site| site.tag != Tag::Adsorbate)
        .map(|site| site.element.as_str())
        .collect();
    if host.len() != 2 {
        return false;
    }
    let philic = host.iter().filter(|e| roles.oxophilic.contains(**e)).count();
    let phobic = host.iter().filter(|e| roles.oxophobic.contains(**e)).count();
    philic == 1 && phobic == 1
}

/// Every reaction adsorbate sits on-top of an oxophilic host atom: its
/// nearest host is oxophilic within `bond_cutoff`, and the second-nearest
/// host is at least `ontop_ratio` times farther away.
pub fn adsorption_validity(s: &Structure, roles: &RoleConfig) -> Result<bool, MetricsError> {
    let ads: Vec<usize> = s
        .sites
        .iter()
        .enumerate()
        .filter(|(_, site)| {
            site.tag == Tag::Adsorbate && roles.adsorbate_species.contains(&site.element)
        })
        .map(|(i, _)| i)
        .collect();
    if ads.is_empty() {
        return Err(MetricsError::NoAdsorbate(s.id.clone()));
    }
    let hosts: Vec<usize> = s
        .sites
        .iter()
        .enumerate()
        .filter(|(_, site)| site.tag != Tag::Adsorbate)
        .map(|(i, _)| i)
        .collect();
    if hosts.is_empty() {
        return Ok(false);
    }
    let Ok(cell) = Cell::new(&s.lattice) else {
        return Ok(false);
    };
    for &a in &ads {
        let mut ds: Vec<(f64, usize)> = hosts
            .iter()
            .map(|&h| (cell.min_image_distance(&s.sites[a].frac, &s.sites[h].frac), h))
            .collect();
        ds.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
        let (d1, h1) = ds[0];
        if !roles.oxophilic.contains(&s.sites[h1].element) || d1 > roles.bond_cutoff {
            return Ok(false);
        }
        if let Some(&(d2, _)) = ds.get(1) {
            if d2 < roles.ontop_ratio * d1 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// One row of descriptor energies from an external predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningRecord {
    pub id: String,
    #[serde(rename = "dG_OOH")]
    pub dg_ooh: f64,
    #[serde(rename = "dG_O")]
    pub dg_o: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    pub passed: Vec<ScreeningRecord>,
    pub near_optimal: Vec<ScreeningRecord>,
}

/// Applies the 2e-ORR descriptor window: 3.22 < dG_OOH < 5.22 and
/// dG_O > 3.52, all strict. The near-optimal subset additionally requires
/// |dG_OOH - 4.22| <= 0.2. Records with non-finite energies never pass.
pub fn screen(records: &[ScreeningRecord]) -> Screening {
    let passed: Vec<ScreeningRecord> = records
        .iter()
        .filter(|r| r.dg_ooh > OOH_LOWER && r.dg_ooh < OOH_UPPER && r.dg_o > O_LOWER)
        .cloned()
        .collect();
    let near_optimal = passed
        .iter()
        .filter(|r| (r.dg_ooh - OOH_IDEAL).abs() <= NEAR_OPTIMAL_WINDOW)
        .cloned()
        .collect();
    Screening { passed, near_optimal }
}
