//! Composition and structure fingerprints plus coverage-cutoff calibration.
//!
//! Both fingerprints are fixed-length 32-vectors so that one Euclidean
//! distance works for either. The composition fingerprint summarizes
//! element properties over the non-adsorbate sites; the structure
//! fingerprint is a site-averaged radial histogram with neighbor-count
//! statistics appended.

use crate::elements::element_properties;
use crate::geometry::Cell;
use crate::structio::{Structure, Tag};

use super::MetricsError;

pub const FP_LEN: usize = 32;

const RDF_BINS: usize = 30;
const RDF_BIN_WIDTH: f64 = 0.2;
const RDF_CUTOFF: f64 = 6.0;

/// 8 element properties x (mean, min, max, range) over non-adsorbate sites.
///
/// The mean is stoichiometry-weighted (each site counts once); min and max
/// range over the property values present. A structure whose sites are all
/// adsorbate-tagged fingerprints to the zero vector.
pub fn composition_fp(s: &Structure) -> Result<Vec<f64>, MetricsError> {
    let mut props: Vec<[f64; 8]> = Vec::new();
    for site in &s.sites {
        if site.tag == Tag::Adsorbate {
            continue;
        }
        let rec = element_properties(&site.element)
            .map_err(|e| MetricsError::UnknownElement(e.0))?;
        props.push(rec.numeric_properties());
    }
    let mut out = vec![0.0; FP_LEN];
    if props.is_empty() {
        return Ok(out);
    }
    let n = props.len() as f64;
    for p in 0..8 {
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in &props {
            sum += v[p];
            min = min.min(v[p]);
            max = max.max(v[p]);
        }
        out[4 * p] = sum / n;
        out[4 * p + 1] = min;
        out[4 * p + 2] = max;
        out[4 * p + 3] = max - min;
    }
    Ok(out)
}

/// 30 radial-histogram bins of 0.2 A (min-image distances below 6 A,
/// normalized per site, averaged over sites) plus the mean and population
/// standard deviation of the per-site neighbor counts.
///
/// A site with no neighbors inside the cutoff contributes a zero histogram.
/// Degenerate cells and empty structures fingerprint to the zero vector.
pub fn structure_fp(s: &Structure) -> Vec<f64> {
    let mut out = vec![0.0; FP_LEN];
    let n = s.sites.len();
    let Ok(cell) = Cell::new(&s.lattice) else {
        return out;
    };
    if n == 0 {
        return out;
    }
    let mut counts = Vec::with_capacity(n);
    for i in 0..n {
        let mut hist = [0.0_f64; RDF_BINS];
        let mut count = 0usize;
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = cell.min_image_distance(&s.sites[i].frac, &s.sites[j].frac);
            if d < RDF_CUTOFF {
                let bin = ((d / RDF_BIN_WIDTH) as usize).min(RDF_BINS - 1);
                hist[bin] += 1.0;
                count += 1;
            }
        }
        if count > 0 {
            for h in &mut hist {
                *h /= count as f64;
            }
        }
        for (o, h) in out.iter_mut().zip(hist.iter()) {
            *o += h / n as f64;
        }
        counts.push(count as f64);
    }
    let mean = counts.iter().sum::<f64>() / n as f64;
    let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n as f64;
    out[RDF_BINS] = mean;
    out[RDF_BINS + 1] = var.sqrt();
    out
}

/// Euclidean distance between two fingerprints.
pub fn fp_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Coverage cutoffs (struct, comp): two thirds of the mean pairwise
/// fingerprint distance over the reference set.
///
/// The mean runs over all n^2 ordered pairs including self-pairs, which
/// makes the cutoffs invariant under duplicating the reference set.
pub fn calibrate_cutoffs(reference: &[Structure]) -> Result<(f64, f64), MetricsError> {
    if reference.len() < 2 {
        return Err(MetricsError::EmptyInput(
            "cutoff calibration needs at least two reference structures",
        ));
    }
    let sfps: Vec<Vec<f64>> = reference.iter().map(structure_fp).collect();
    let cfps: Vec<Vec<f64>> = reference
        .iter()
        .map(composition_fp)
        .collect::<Result<_, _>>()?;
    let mut ssum = 0.0;
    let mut csum = 0.0;
    for i in 0..reference.len() {
        for j in 0..reference.len() {
            ssum += fp_distance(&sfps[i], &sfps[j]);
            csum += fp_distance(&cfps[i], &cfps[j]);
        }
    }
    let pairs = (reference.len() * reference.len()) as f64;
    Ok((2.0 / 3.0 * ssum / pairs, 2.0 / 3.0 * csum / pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FracCoord, Lattice};
    use crate::structio::Site;

    fn cubic(id: &str, a: f64, sites: &[(&str, [f64; 3], Tag)]) -> Structure {
        Structure {
            id: id.to_string(),
            lattice: Lattice::new(a, a, a, 90.0, 90.0, 90.0).unwrap(),
            sites: sites
                .iter()
                .map(|(el, f, tag)| Site {
                    element: el.to_string(),
                    frac: FracCoord::new(f[0], f[1], f[2]),
                    tag: *tag,
                })
                .collect(),
        }
    }

    #[test]
    fn composition_fp_pure_metal() {
        let s = cubic(
            "pt",
            4.0,
            &[
                ("Pt", [0.0, 0.0, 0.0], Tag::Bulk),
                ("Pt", [0.5, 0.5, 0.5], Tag::Bulk),
            ],
        );
        let fp = composition_fp(&s).unwrap();
        let pt = element_properties("Pt").unwrap().numeric_properties();
        for p in 0..8 {
            assert_eq!(fp[4 * p], pt[p]);
            assert_eq!(fp[4 * p + 1], pt[p]);
            assert_eq!(fp[4 * p + 2], pt[p]);
            assert_eq!(fp[4 * p + 3], 0.0);
        }
    }

    #[test]
    fn composition_fp_binary_midpoint() {
        let s = cubic(
            "ptau",
            4.0,
            &[
                ("Pt", [0.0, 0.0, 0.0], Tag::Bulk),
                ("Au", [0.5, 0.5, 0.5], Tag::Bulk),
            ],
        );
        let fp = composition_fp(&s).unwrap();
        let pt = element_properties("Pt").unwrap().numeric_properties();
        let au = element_properties("Au").unwrap().numeric_properties();
        for p in 0..8 {
            assert!((fp[4 * p] - 0.5 * (pt[p] + au[p])).abs() < 1e-12);
            assert_eq!(fp[4 * p + 1], pt[p].min(au[p]));
            assert_eq!(fp[4 * p + 2], pt[p].max(au[p]));
            assert!((fp[4 * p + 3] - (pt[p] - au[p]).abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn composition_fp_skips_adsorbates() {
        let host = cubic("h", 4.0, &[("Pt", [0.0, 0.0, 0.0], Tag::Bulk)]);
        let with_o = cubic(
            "ho",
            4.0,
            &[
                ("Pt", [0.0, 0.0, 0.0], Tag::Bulk),
                ("O", [0.5, 0.5, 0.5], Tag::Adsorbate),
            ],
        );
        assert_eq!(composition_fp(&host).unwrap(), composition_fp(&with_o).unwrap());
        let all_ads = cubic("o", 4.0, &[("O", [0.0, 0.0, 0.0], Tag::Adsorbate)]);
        assert_eq!(composition_fp(&all_ads).unwrap(), vec![0.0; FP_LEN]);
    }

    #[test]
    fn structure_fp_single_pair() {
        let s = cubic(
            "pair",
            10.0,
            &[
                ("Pt", [0.0, 0.0, 0.0], Tag::Bulk),
                ("Pt", [0.25, 0.0, 0.0], Tag::Bulk),
            ],
        );
        let fp = structure_fp(&s);
        let bin = (2.5 / RDF_BIN_WIDTH) as usize;
        for (k, v) in fp.iter().take(RDF_BINS).enumerate() {
            if k == bin {
                assert!((v - 1.0).abs() < 1e-12);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
        assert_eq!(fp[RDF_BINS], 1.0);
        assert_eq!(fp[RDF_BINS + 1], 0.0);
    }

    #[test]
    fn structure_fp_respects_cutoff() {
        let s = cubic(
            "far",
            20.0,
            &[
                ("Pt", [0.0, 0.0, 0.0], Tag::Bulk),
                ("Pt", [0.35, 0.0, 0.0], Tag::Bulk),
            ],
        );
        let fp = structure_fp(&s);
        assert_eq!(fp, vec![0.0; FP_LEN]);
    }

    #[test]
    fn structure_fp_counts_min_image_once() {
        let s = cubic(
            "img",
            4.0,
            &[
                ("Pt", [0.0, 0.0, 0.0], Tag::Bulk),
                ("Pt", [0.5, 0.0, 0.0], Tag::Bulk),
            ],
        );
        let fp = structure_fp(&s);
        assert_eq!(fp[RDF_BINS], 1.0);
        let bin = (2.0 / RDF_BIN_WIDTH) as usize;
        assert!((fp[bin] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fingerprints_are_translation_invariant() {
        use rand::SeedableRng;
        let s = cubic(
            "t",
            7.3,
            &[
                ("Pt", [0.11, 0.23, 0.31], Tag::Bulk),
                ("Ti", [0.62, 0.17, 0.48], Tag::Bulk),
                ("Pt", [0.33, 0.71, 0.09], Tag::Surface),
                ("O", [0.52, 0.52, 0.77], Tag::Adsorbate),
            ],
        );
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(5);
        for _ in 0..10 {
            let t = crate::datagen::augment_translate(&s, &mut rng);
            assert_eq!(composition_fp(&s).unwrap(), composition_fp(&t).unwrap());
            let a = structure_fp(&s);
            let b = structure_fp(&t);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn cutoffs_on_identical_sets_are_zero() {
        let s = cubic("a", 4.0, &[("Pt", [0.0, 0.0, 0.0], Tag::Bulk)]);
        let refs = vec![s.clone(), s.clone(), s];
        assert_eq!(calibrate_cutoffs(&refs).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn cutoffs_invariant_under_duplication() {
        let a = cubic("a", 4.0, &[("Pt", [0.0, 0.0, 0.0], Tag::Bulk)]);
        let b = cubic(
            "b",
            5.0,
            &[
                ("Au", [0.0, 0.0, 0.0], Tag::Bulk),
                ("Ti", [0.5, 0.5, 0.5], Tag::Bulk),
            ],
        );
        let once = vec![a.clone(), b.clone()];
        let twice = vec![a.clone(), b.clone(), a, b];
        let (s1, c1) = calibrate_cutoffs(&once).unwrap();
        let (s2, c2) = calibrate_cutoffs(&twice).unwrap();
        assert!((s1 - s2).abs() < 1e-12 * s1.max(1.0));
        assert!((c1 - c2).abs() < 1e-12 * c1.max(1.0));
    }

    #[test]
    fn cutoffs_match_two_structure_hand_value() {
        let a = cubic("a", 4.0, &[("Pt", [0.0, 0.0, 0.0], Tag::Bulk)]);
        let b = cubic("b", 5.0, &[("Au", [0.0, 0.0, 0.0], Tag::Bulk)]);
        let d_s = fp_distance(&structure_fp(&a), &structure_fp(&b));
        let d_c = fp_distance(
            &composition_fp(&a).unwrap(),
            &composition_fp(&b).unwrap(),
        );
        let (cs, cc) = calibrate_cutoffs(&[a, b]).unwrap();
        assert!((cs - 2.0 / 3.0 * 2.0 * d_s / 4.0).abs() < 1e-12);
        assert!((cc - 2.0 / 3.0 * 2.0 * d_c / 4.0).abs() < 1e-12);
    }

    #[test]
    fn cutoffs_reject_singleton() {
        let s = cubic("a", 4.0, &[("Pt", [0.0, 0.0, 0.0], Tag::Bulk)]);
        assert!(matches!(
            calibrate_cutoffs(&[s]),
            Err(MetricsError::EmptyInput(_))
        ));
    }
}
