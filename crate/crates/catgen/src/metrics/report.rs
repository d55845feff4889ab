//! End-to-end evaluation of a generated sample set against a reference set.
//!
//! Denominators follow a fixed protocol: structural, catalyst, and 2e-ORR
//! validity and coverage are computed over the generation-valid items
//! (sequences that parsed); property EMD and diversity are computed over the
//! items that passed every enabled validity check, with the property EMD
//! optionally sub-sampled.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::codec::{decode, Bypass, DecodeError};
use crate::neural::DetectorModel;
use crate::structio::Structure;

use super::{
    calibrate_cutoffs, composition_validity, coverage, property_emd, structural_validity,
    uniqueness, CoverageReport, DiversityReport, MatchTolerances, MetricsError, PropertyReport,
    Ratio, RoleConfig, ValidityReport,
};

/// One generated sample: the raw token sequence and its decode outcome.
#[derive(Debug, Clone)]
pub struct GenSample {
    pub tokens: Vec<usize>,
    pub decoded: Result<Structure, DecodeError>,
}

impl GenSample {
    pub fn from_tokens(tokens: Vec<usize>, bypass: Bypass) -> Self {
        let decoded = decode(&tokens, bypass).map(|d| d.structure);
        GenSample { tokens, decoded }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub tolerances: MatchTolerances,
    /// Enables the 2e-ORR composition and adsorption checks.
    pub roles: Option<RoleConfig>,
    /// Overrides the calibrated (struct, comp) coverage cutoffs.
    pub cutoffs: Option<(f64, f64)>,
    /// Max generated structures in the property EMD; 0 disables sub-sampling.
    pub emd_sample: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            tolerances: MatchTolerances::default(),
            roles: None,
            cutoffs: None,
            emd_sample: 5000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_samples: usize,
    pub validity: ValidityReport,
    pub coverage: CoverageReport,
    pub property: PropertyReport,
    pub diversity: DiversityReport,
}

pub fn evaluate(
    gen: &[GenSample],
    gt: &[Structure],
    train: Option<&[Structure]>,
    detector: Option<&DetectorModel>,
    opts: &EvalOptions,
) -> Result<EvaluationReport, MetricsError> {
    if gen.is_empty() {
        return Err(MetricsError::EmptyInput("evaluation needs generated samples"));
    }
    if gt.is_empty() {
        return Err(MetricsError::EmptyInput("evaluation needs reference structures"));
    }
    if let Some(roles) = &opts.roles {
        roles.validate()?;
    }

    let parsed: Vec<(&Vec<usize>, &Structure)> = gen
        .iter()
        .filter_map(|g| g.decoded.as_ref().ok().map(|s| (&g.tokens, s)))
        .collect();
    let generation = Ratio::new(parsed.len(), gen.len());
    if parsed.is_empty() {
        return Err(MetricsError::EmptyInput(
            "no generation-valid samples to evaluate",
        ));
    }

    let struct_ok: Vec<bool> = parsed.iter().map(|(_, s)| structural_validity(s)).collect();
    let structural = Ratio::new(struct_ok.iter().filter(|b| **b).count(), parsed.len());

    let cat_ok: Option<Vec<bool>> = detector.map(|d| {
        parsed
            .iter()
            .map(|(tokens, _)| super::detector_pass(d, tokens))
            .collect()
    });
    let catalyst = cat_ok
        .as_ref()
        .map(|ok| Ratio::new(ok.iter().filter(|b| **b).count(), parsed.len()));

    let (comp_ok, ads_ok) = match &opts.roles {
        Some(roles) => {
            let comp: Vec<bool> = parsed
                .iter()
                .map(|(_, s)| composition_validity(s, roles))
                .collect();
            let ads: Vec<bool> = parsed
                .iter()
                .map(|(_, s)| super::adsorption_validity(s, roles).unwrap_or(false))
                .collect();
            (Some(comp), Some(ads))
        }
        None => (None, None),
    };
    let composition = comp_ok
        .as_ref()
        .map(|ok| Ratio::new(ok.iter().filter(|b| **b).count(), parsed.len()));
    let adsorption = ads_ok
        .as_ref()
        .map(|ok| Ratio::new(ok.iter().filter(|b| **b).count(), parsed.len()));

    let parsed_structs: Vec<Structure> = parsed.iter().map(|(_, s)| (*s).clone()).collect();
    let cutoffs = match opts.cutoffs {
        Some(c) => c,
        None => calibrate_cutoffs(gt)?,
    };
    let coverage_report = coverage(&parsed_structs, gt, cutoffs)?;

    let all_valid: Vec<Structure> = (0..parsed.len())
        .filter(|&i| {
            struct_ok[i]
                && cat_ok.as_ref().is_none_or(|ok| ok[i])
                && comp_ok.as_ref().is_none_or(|ok| ok[i])
                && ads_ok.as_ref().is_none_or(|ok| ok[i])
        })
        .map(|i| parsed[i].1.clone())
        .collect();
    if all_valid.is_empty() {
        return Err(MetricsError::EmptyInput(
            "no samples passed all validity checks",
        ));
    }

    let emd_set: Vec<Structure> = if opts.emd_sample > 0 && all_valid.len() > opts.emd_sample {
        let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
        rand::seq::index::sample(&mut rng, all_valid.len(), opts.emd_sample)
            .into_iter()
            .map(|i| all_valid[i].clone())
            .collect()
    } else {
        all_valid.clone()
    };
    let property = property_emd(&emd_set, gt)?;

    let uniq = uniqueness(&all_valid, &opts.tolerances)?;
    let novel = match train {
        Some(t) => Some(super::novelty(&all_valid, t, &opts.tolerances)?),
        None => None,
    };

    Ok(EvaluationReport {
        n_samples: gen.len(),
        validity: ValidityReport {
            generation,
            structural,
            catalyst,
            composition,
            adsorption,
        },
        coverage: coverage_report,
        property,
        diversity: DiversityReport {
            uniqueness: uniq,
            novelty: novel,
        },
    })
}

fn fmt_ratio(r: &Ratio) -> String {
    format!("{:.3}", r.value)
}

fn fmt_opt(r: &Option<Ratio>) -> String {
    r.as_ref().map(fmt_ratio).unwrap_or_else(|| "-".to_string())
}

/// Renders the report as one aligned text table with the five metric groups
/// as column blocks.
pub fn render_table(r: &EvaluationReport) -> String {
    let groups: Vec<(&str, Vec<(&str, String)>)> = vec![
        (
            "Validity",
            vec![
                ("Generation", fmt_ratio(&r.validity.generation)),
                ("Structural", fmt_ratio(&r.validity.structural)),
                ("Catalyst", fmt_opt(&r.validity.catalyst)),
            ],
        ),
        (
            "Coverage",
            vec![
                ("Recall", format!("{:.3}", r.coverage.recall)),
                ("Precision", format!("{:.3}", r.coverage.precision)),
            ],
        ),
        (
            "Property Distribution",
            vec![
                ("EMD(rho)", format!("{:.4}", r.property.emd_density)),
                ("EMD(N_el)", format!("{:.4}", r.property.emd_nel)),
            ],
        ),
        (
            "2e-ORR Validity",
            vec![
                ("Composition", fmt_opt(&r.validity.composition)),
                ("Adsorption", fmt_opt(&r.validity.adsorption)),
            ],
        ),
        (
            "Diversity",
            vec![
                ("Uniqueness", format!("{:.3}", r.diversity.uniqueness)),
                (
                    "Novelty",
                    r.diversity
                        .novelty
                        .map(|v| format!("{v:.3}"))
                        .unwrap_or_else(|| "-".to_string()),
                ),
            ],
        ),
    ];
    let mut titles = Vec::new();
    let mut headers = Vec::new();
    let mut values = Vec::new();
    for (title, cols) in &groups {
        let widths: Vec<usize> = cols
            .iter()
            .map(|(h, v)| h.len().max(v.len()))
            .collect();
        let header = cols
            .iter()
            .zip(&widths)
            .map(|((h, _), w)| format!("{h:>w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        let value = cols
            .iter()
            .zip(&widths)
            .map(|((_, v), w)| format!("{v:>w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        let width = title.len().max(header.len());
        titles.push(format!("{title:<width$}"));
        headers.push(format!("{header:<width$}"));
        values.push(format!("{value:<width$}"));
    }
    let title_row = titles.join(" | ");
    let rule = "-".repeat(title_row.len());
    format!(
        "{}\n{}\n{}\n{}\n",
        title_row,
        headers.join(" | "),
        rule,
        values.join(" | ")
    )
}

/// The JSON schema shipped with the crate, describing [`EvaluationReport`].
pub fn report_schema() -> Value {
    serde_json::from_str(include_str!("../../schema/report.schema.json"))
        .expect("shipped schema parses")
}

fn type_ok(v: &Value, t: &str) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.as_i64().is_some() || v.as_u64().is_some(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        _ => false,
    }
}

fn walk(v: &Value, schema: &Value, path: &str) -> Result<(), String> {
    if let Some(t) = schema.get("type") {
        let allowed: Vec<&str> = match t {
            Value::String(s) => vec![s.as_str()],
            Value::Array(xs) => xs.iter().filter_map(|x| x.as_str()).collect(),
            _ => return Err(format!("{path}: malformed schema type")),
        };
        if !allowed.iter().any(|t| type_ok(v, t)) {
            return Err(format!("{path}: expected type {allowed:?}"));
        }
        if v.is_null() {
            return Ok(());
        }
    }
    if let Some(req) = schema.get("required").and_then(Value::as_array) {
        for key in req.iter().filter_map(Value::as_str) {
            if v.get(key).is_none() {
                return Err(format!("{path}: missing required key {key:?}"));
            }
        }
    }
    if let Some(props) = schema.get("properties").and_then(Value::as_object) {
        for (key, sub) in props {
            if let Some(child) = v.get(key) {
                walk(child, sub, &format!("{path}.{key}"))?;
            }
        }
    }
    if let Some(items) = schema.get("items") {
        if let Some(arr) = v.as_array() {
            for (i, child) in arr.iter().enumerate() {
                walk(child, items, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}

/// Validates a JSON value against the subset of JSON Schema used by the
/// shipped report schema (type, required, properties, items).
pub fn validate_schema(value: &Value, schema: &Value) -> Result<(), String> {
    walk(value, schema, "$")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::structures_match;
    use crate::codec::encode;
    use crate::geometry::{FracCoord, Lattice};
    use crate::structio::{Site, Tag};

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

    fn round_trip(structs: Vec<Structure>) -> Vec<Structure> {
        structs
            .iter()
            .map(|s| decode(&encode(s).unwrap(), Bypass::Off).unwrap().structure)
            .collect()
    }

    fn ground_truth() -> Vec<Structure> {
        round_trip(vec![
            cubic(
                "gt0",
                4.5,
                &[
                    ("Pt", [0.0, 0.0, 0.0], Tag::Bulk),
                    ("Ti", [0.5, 0.5, 0.5], Tag::Bulk),
                ],
            ),
            cubic(
                "gt1",
                5.4,
                &[
                    ("Au", [0.0, 0.0, 0.0], Tag::Bulk),
                    ("Nb", [0.5, 0.5, 0.5], Tag::Bulk),
                ],
            ),
            cubic(
                "gt2",
                7.2,
                &[
                    ("Cu", [0.0, 0.0, 0.0], Tag::Bulk),
                    ("W", [0.25, 0.25, 0.25], Tag::Bulk),
                    ("Cu", [0.5, 0.5, 0.5], Tag::Bulk),
                ],
            ),
        ])
    }

    fn samples_from(structs: &[Structure]) -> Vec<GenSample> {
        structs
            .iter()
            .map(|s| GenSample::from_tokens(encode(s).unwrap(), Bypass::Off))
            .collect()
    }

    #[test]
    fn evaluate_happy_path() {
        let gt = ground_truth();
        let mut gen = samples_from(&gt);
        gen.push(GenSample::from_tokens(vec![0, 1], Bypass::Off));
        let rep = evaluate(&gen, &gt, Some(&gt), None, &EvalOptions::default()).unwrap();
        assert_eq!(rep.n_samples, 4);
        assert_eq!(rep.validity.generation, Ratio::new(3, 4));
        assert_eq!(rep.validity.structural, Ratio::new(3, 3));
        assert!(rep.validity.catalyst.is_none());
        assert!(rep.validity.composition.is_none());
        assert_eq!(rep.coverage.recall, 1.0);
        assert_eq!(rep.coverage.precision, 1.0);
        assert_eq!(rep.property.emd_density, 0.0);
        assert_eq!(rep.property.emd_nel, 0.0);
        assert_eq!(rep.property.sample_size, 3);
        assert_eq!(rep.diversity.uniqueness, 1.0);
        assert_eq!(rep.diversity.novelty, Some(0.0));
    }

    #[test]
    fn evaluate_requires_parseable_samples() {
        let gt = ground_truth();
        assert!(matches!(
            evaluate(&[], &gt, None, None, &EvalOptions::default()),
            Err(MetricsError::EmptyInput(_))
        ));
        let broken = vec![GenSample::from_tokens(vec![5, 5], Bypass::Off)];
        assert!(matches!(
            evaluate(&broken, &gt, None, None, &EvalOptions::default()),
            Err(MetricsError::EmptyInput(_))
        ));
    }

    // The adsorbate must sit above every host so the decode-side retagging
    // keeps it an adsorbate.
    fn orr_world() -> (Vec<Structure>, Vec<GenSample>) {
        // on-top O over Ti with a Pt counter-element: passes both rules
        let good = cubic(
            "good",
            9.0,
            &[
                ("Pt", [0.5, 0.5, 0.3], Tag::Bulk),
                ("Ti", [0.5, 0.5, 0.6], Tag::Surface),
                ("O", [0.5, 0.5, 0.822], Tag::Adsorbate),
            ],
        );
        // two oxophobic hosts: composition fails, adsorption fails
        let bad_comp = cubic(
            "badc",
            9.0,
            &[
                ("Au", [0.5, 0.5, 0.3], Tag::Bulk),
                ("Pt", [0.5, 0.5, 0.6], Tag::Surface),
                ("O", [0.5, 0.5, 0.822], Tag::Adsorbate),
            ],
        );
        // right composition but no adsorbate at all
        let no_ads = cubic(
            "noads",
            9.0,
            &[
                ("Ti", [0.5, 0.5, 0.3], Tag::Bulk),
                ("Pt", [0.5, 0.5, 0.6], Tag::Surface),
            ],
        );
        let gt = round_trip(vec![good.clone(), bad_comp.clone(), no_ads.clone()]);
        let gen = samples_from(&gt);
        (gt, gen)
    }

    #[test]
    fn evaluate_with_roles() {
        let (gt, gen) = orr_world();
        let opts = EvalOptions {
            roles: Some(RoleConfig::default()),
            ..EvalOptions::default()
        };
        let rep = evaluate(&gen, &gt, None, None, &opts).unwrap();
        assert_eq!(rep.validity.generation, Ratio::new(3, 3));
        assert_eq!(rep.validity.composition, Some(Ratio::new(2, 3)));
        assert_eq!(rep.validity.adsorption, Some(Ratio::new(1, 3)));
        // only the fully valid structure feeds diversity
        assert_eq!(rep.diversity.uniqueness, 1.0);
        assert_eq!(rep.property.sample_size, 1);
        assert!(rep.diversity.novelty.is_none());
    }

    #[test]
    fn evaluate_is_deterministic() {
        let (gt, gen) = orr_world();
        let opts = EvalOptions {
            roles: Some(RoleConfig::default()),
            emd_sample: 2,
            ..EvalOptions::default()
        };
        let a = evaluate(&gen, &gt, Some(&gt), None, &opts).unwrap();
        let b = evaluate(&gen, &gt, Some(&gt), None, &opts).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn emd_sub_sampling_is_seeded() {
        let gt = ground_truth();
        let mut gen = samples_from(&gt);
        for _ in 0..3 {
            gen.extend(samples_from(&gt));
        }
        let opts = EvalOptions {
            emd_sample: 4,
            seed: 9,
            ..EvalOptions::default()
        };
        let a = evaluate(&gen, &gt, None, None, &opts).unwrap();
        let b = evaluate(&gen, &gt, None, None, &opts).unwrap();
        assert_eq!(a.property.sample_size, 4);
        assert_eq!(a.property, b.property);
    }

    #[test]
    fn report_json_validates_against_schema() {
        let (gt, gen) = orr_world();
        let opts = EvalOptions {
            roles: Some(RoleConfig::default()),
            ..EvalOptions::default()
        };
        let rep = evaluate(&gen, &gt, Some(&gt), None, &opts).unwrap();
        let json = serde_json::to_value(&rep).unwrap();
        let schema = report_schema();
        validate_schema(&json, &schema).unwrap();

        let mut missing = json.clone();
        missing.as_object_mut().unwrap().remove("coverage");
        assert!(validate_schema(&missing, &schema).is_err());

        let mut wrong = json;
        wrong["validity"]["generation"]["count"] = Value::String("three".into());
        assert!(validate_schema(&wrong, &schema).is_err());
    }

    #[test]
    fn table_renders_all_groups() {
        let gt = ground_truth();
        let gen = samples_from(&gt);
        let rep = evaluate(&gen, &gt, Some(&gt), None, &EvalOptions::default()).unwrap();
        let table = render_table(&rep);
        for title in [
            "Validity",
            "Coverage",
            "Property Distribution",
            "2e-ORR Validity",
            "Diversity",
        ] {
            assert!(table.contains(title), "missing {title} in:\n{table}");
        }
        assert!(table.contains("1.000"));
        // catalyst and 2e-ORR columns fall back to dashes without inputs
        assert!(table.contains('-'));
        let widths: Vec<usize> = table.lines().map(|l| l.len()).collect();
        assert_eq!(widths[0], widths[1]);
        assert_eq!(widths[0], widths[3]);
    }

    #[test]
    fn match_and_table_roundtrip_against_serde() {
        let (gt, gen) = orr_world();
        let rep = evaluate(&gen, &gt, None, None, &EvalOptions::default()).unwrap();
        let json = serde_json::to_string(&rep).unwrap();
        let back: EvaluationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
        // decoded structures really did round-trip the codec
        for g in &gen {
            let s = g.decoded.as_ref().unwrap();
            assert!(gt.iter().any(|t| structures_match(s, t, &MatchTolerances::default())));
        }
    }
}
