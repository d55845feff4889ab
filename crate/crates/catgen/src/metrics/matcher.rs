//! Tolerance-based structure matching for uniqueness and novelty.
//!
//! Two structures match when their compositions agree, their lattice
//! parameters agree within tolerance, and some rigid translation overlays
//! the sites with a small mean displacement. Distances are measured in the
//! averaged-lattice frame so the test is symmetric in its arguments.
//! Matching is reflexive and symmetric but not transitive.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{Cell, FracCoord, Lattice};
use crate::structio::Structure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchTolerances {
    /// Relative length tolerance: |la - lb| <= length_rtol * max(la, lb).
    pub length_rtol: f64,
    /// Absolute angle tolerance in degrees.
    pub angle_atol: f64,
    /// Site tolerance as a fraction of (V/N)^(1/3).
    pub site_tol: f64,
}

impl Default for MatchTolerances {
    fn default() -> Self {
        MatchTolerances {
            length_rtol: 0.2,
            angle_atol: 5.0,
            site_tol: 0.3,
        }
    }
}

fn composition(s: &Structure) -> BTreeMap<&str, usize> {
    let mut map = BTreeMap::new();
    for site in &s.sites {
        *map.entry(site.element.as_str()).or_insert(0) += 1;
    }
    map
}

fn shifted(f: &FracCoord, t: [f64; 3]) -> FracCoord {
    FracCoord::new(f.x + t[0], f.y + t[1], f.z + t[2])
}

fn delta(to: &FracCoord, from: &FracCoord) -> [f64; 3] {
    [to.x - from.x, to.y - from.y, to.z - from.z]
}

/// Mean matched-site displacement under translation `t`, via greedy
/// same-element pairing in ascending distance order.
fn mean_displacement(a: &Structure, b: &Structure, cell: &Cell, t: [f64; 3]) -> f64 {
    let n = a.sites.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n / 2);
    for (i, sa) in a.sites.iter().enumerate() {
        let fa = shifted(&sa.frac, t);
        for (j, sb) in b.sites.iter().enumerate() {
            if sa.element != sb.element {
                continue;
            }
            pairs.push((cell.min_image_distance(&fa, &sb.frac), i, j));
        }
    }
    pairs.sort_by(|p, q| {
        p.0.total_cmp(&q.0)
            .then(p.1.min(p.2).cmp(&q.1.min(q.2)))
            .then(p.1.max(p.2).cmp(&q.1.max(q.2)))
    });
    let mut used_a = vec![false; n];
    let mut used_b = vec![false; n];
    let mut sum = 0.0;
    let mut matched = 0usize;
    for (d, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            sum += d;
            matched += 1;
            if matched == n {
                break;
            }
        }
    }
    sum / n as f64
}

pub fn structures_match(a: &Structure, b: &Structure, tol: &MatchTolerances) -> bool {
    let n = a.sites.len();
    if n == 0 || b.sites.len() != n {
        return false;
    }
    if composition(a) != composition(b) {
        return false;
    }
    for (la, lb) in a.lattice.lengths().iter().zip(b.lattice.lengths()) {
        if (la - lb).abs() > tol.length_rtol * la.max(lb) {
            return false;
        }
    }
    for (aa, ab) in a.lattice.angles().iter().zip(b.lattice.angles()) {
        if (aa - ab).abs() > tol.angle_atol {
            return false;
        }
    }
    let avg = Lattice {
        a: 0.5 * (a.lattice.a + b.lattice.a),
        b: 0.5 * (a.lattice.b + b.lattice.b),
        c: 0.5 * (a.lattice.c + b.lattice.c),
        alpha: 0.5 * (a.lattice.alpha + b.lattice.alpha),
        beta: 0.5 * (a.lattice.beta + b.lattice.beta),
        gamma: 0.5 * (a.lattice.gamma + b.lattice.gamma),
    };
    if avg.validate().is_err() {
        return false;
    }
    let Ok(cell) = Cell::new(&avg) else {
        return false;
    };
    let volume = crate::geometry::cell_volume(&avg).unwrap_or(0.0);
    let threshold = tol.site_tol * (volume / n as f64).cbrt();

    // Candidate translations from the rarest element, in both directions so
    // that match(a, b) agrees with match(b, a).
    let comp = composition(a);
    let rare = comp
        .iter()
        .min_by(|x, y| x.1.cmp(y.1).then(x.0.cmp(y.0)))
        .map(|(el, _)| el.to_string())
        .expect("non-empty structure");
    let a_rare: Vec<&FracCoord> = a
        .sites
        .iter()
        .filter(|s| s.element == rare)
        .map(|s| &s.frac)
        .collect();
    let b_rare: Vec<&FracCoord> = b
        .sites
        .iter()
        .filter(|s| s.element == rare)
        .map(|s| &s.frac)
        .collect();
    let mut candidates: Vec<[f64; 3]> = Vec::with_capacity(a_rare.len() + b_rare.len());
    for fb in &b_rare {
        candidates.push(delta(fb, a_rare[0]));
    }
    for fa in &a_rare {
        candidates.push(delta(b_rare[0], fa));
    }
    candidates
        .iter()
        .any(|&t| mean_displacement(a, b, &cell, t) <= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{augment_permute, augment_translate};
    use crate::structio::{Site, Tag};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn fixture(id: &str, a_len: f64, coords: &[(&str, [f64; 3])]) -> Structure {
        Structure {
            id: id.to_string(),
            lattice: Lattice::new(a_len, a_len, a_len, 90.0, 90.0, 90.0).unwrap(),
            sites: coords
                .iter()
                .map(|(el, f)| Site {
                    element: el.to_string(),
                    frac: FracCoord::new(f[0], f[1], f[2]),
                    tag: Tag::Bulk,
                })
                .collect(),
        }
    }

    fn slab() -> Structure {
        fixture(
            "slab",
            6.0,
            &[
                ("Pt", [0.1, 0.1, 0.1]),
                ("Pt", [0.6, 0.1, 0.1]),
                ("Pt", [0.1, 0.6, 0.1]),
                ("Ti", [0.6, 0.6, 0.1]),
                ("Ti", [0.35, 0.35, 0.5]),
                ("O", [0.35, 0.35, 0.85]),
            ],
        )
    }

    #[test]
    fn matches_itself_and_translated_copies() {
        let s = slab();
        let tol = MatchTolerances::default();
        assert!(structures_match(&s, &s, &tol));
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..5 {
            let t = augment_translate(&s, &mut rng);
            assert!(structures_match(&s, &t, &tol));
            assert!(structures_match(&t, &s, &tol));
        }
    }

    #[test]
    fn matches_permuted_sites() {
        let s = slab();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let p = augment_permute(&s, &mut rng);
        assert!(structures_match(&s, &p, &MatchTolerances::default()));
    }

    fn jitter(s: &Structure, rng: &mut ChaCha20Rng, amount: f64) -> Structure {
        let mut out = s.clone();
        for site in &mut out.sites {
            let f = site.frac.as_array();
            site.frac = FracCoord::new(
                f[0] + rng.gen_range(-amount..amount),
                f[1] + rng.gen_range(-amount..amount),
                f[2] + rng.gen_range(-amount..amount),
            );
        }
        out
    }

    #[test]
    fn site_tolerance_separates_jitter_scales() {
        let s = slab();
        // threshold 0.05 * (216/6)^(1/3) ~ 0.165 A
        let tight = MatchTolerances {
            site_tol: 0.05,
            ..MatchTolerances::default()
        };
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let small = jitter(&s, &mut rng, 0.008);
        assert!(structures_match(&s, &small, &tight));
        let large = jitter(&s, &mut rng, 0.1);
        assert!(!structures_match(&s, &large, &tight));
        assert!(!structures_match(&large, &s, &tight));
    }

    #[test]
    fn different_motif_same_composition_is_no_match() {
        let s = slab();
        let other = fixture(
            "other",
            6.0,
            &[
                ("Pt", [0.0, 0.0, 0.0]),
                ("Pt", [0.5, 0.0, 0.25]),
                ("Pt", [0.0, 0.5, 0.5]),
                ("Ti", [0.5, 0.5, 0.75]),
                ("Ti", [0.25, 0.25, 0.1]),
                ("O", [0.75, 0.75, 0.6]),
            ],
        );
        let tol = MatchTolerances::default();
        assert!(!structures_match(&s, &other, &tol));
        assert!(!structures_match(&other, &s, &tol));
    }

    #[test]
    fn rejects_composition_and_lattice_mismatches() {
        let s = slab();
        let tol = MatchTolerances::default();

        let mut other_comp = s.clone();
        other_comp.sites[0].element = "Au".to_string();
        assert!(!structures_match(&s, &other_comp, &tol));

        let mut fewer = s.clone();
        fewer.sites.pop();
        assert!(!structures_match(&s, &fewer, &tol));

        let mut long = s.clone();
        long.lattice = Lattice::new(7.6, 6.0, 6.0, 90.0, 90.0, 90.0).unwrap();
        assert!(!structures_match(&s, &long, &tol));

        let mut tilted = s.clone();
        tilted.lattice = Lattice::new(6.0, 6.0, 6.0, 90.0, 90.0, 96.0).unwrap();
        assert!(!structures_match(&s, &tilted, &tol));
    }

    #[test]
    fn lattice_tolerance_boundary() {
        let s = fixture("a", 5.0, &[("Pt", [0.0, 0.0, 0.0])]);
        let just_in = fixture("b", 6.0, &[("Pt", [0.0, 0.0, 0.0])]);
        let just_out = fixture("c", 6.3, &[("Pt", [0.0, 0.0, 0.0])]);
        let tol = MatchTolerances::default();
        assert!(structures_match(&s, &just_in, &tol));
        assert!(!structures_match(&s, &just_out, &tol));
    }

    #[test]
    fn symmetric_on_random_pairs() {
        let tol = MatchTolerances::default();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for k in 0..40 {
            let base = slab();
            let mut other = augment_translate(&base, &mut rng);
            let scale: f64 = rng.gen_range(0.0..0.06);
            for site in &mut other.sites {
                let f = site.frac.as_array();
                site.frac = FracCoord::new(
                    f[0] + rng.gen_range(-scale..scale.max(1e-9)),
                    f[1] + rng.gen_range(-scale..scale.max(1e-9)),
                    f[2] + rng.gen_range(-scale..scale.max(1e-9)),
                );
            }
            let ab = structures_match(&base, &other, &tol);
            let ba = structures_match(&other, &base, &tol);
            assert_eq!(ab, ba, "asymmetric at iteration {k}");
        }
    }

    #[test]
    fn empty_structures_never_match() {
        let a = Structure {
            id: "e".to_string(),
            lattice: Lattice::new(4.0, 4.0, 4.0, 90.0, 90.0, 90.0).unwrap(),
            sites: vec![],
        };
        assert!(!structures_match(&a, &a, &MatchTolerances::default()));
    }
}
