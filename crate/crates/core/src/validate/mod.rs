//! Desk-scale check that neighbor interpolation reproduces direct scores.
//!
//! Each synthetic city is scored twice over: listings with their own
//! certificate form the direct group (G2), listings scored from neighbors form
//! the interpolated group (G1). A TOST on the two groups' EcoGrade means
//! decides equivalence.

mod corpus;
mod export;
mod synth;
mod tost;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use corpus::{synthetic_store, CorpusParams, BOOKING_MONTHS};
pub use export::{export_distributions, write_distribution_files, Distribution, GroupBy, HistogramBin, BIN_WIDTH};
pub use synth::{assign_random_area, generate_city, CityProfile, PostcodeGeometry, SyntheticCity, SyntheticCityParams};
pub use tost::{
    mean_confidence_interval, tost_equivalence, ConfidenceInterval, TostResult, DEFAULT_ALPHA, DEFAULT_MARGIN,
};

use crate::error::ValidateError;
use crate::geo::GeoPoint;
use crate::ingest::{clean_records, dedupe_by_address, CleaningRules};
use crate::matching::{find_direct, find_neighbors, EpcIndex};
use crate::model::{EcoGradeReport, Listing};
use crate::score::{CertificateEvidence, Scorer};

/// The ten validation cities.
pub const DEFAULT_CITIES: [&str; 10] = [
    "Birmingham",
    "Bristol",
    "Cardiff",
    "Edinburgh",
    "Glasgow",
    "London",
    "Manchester",
    "Milton Keynes",
    "Newcastle",
    "Nottingham",
];

pub const DEFAULT_SEED: u64 = 20_240_501;

/// Default parameters for one of [`DEFAULT_CITIES`].
///
/// The profiles are illustrative: most cities cluster around a modest
/// quality with a narrow spread, while London and Milton Keynes have newer
/// stock, a wider spread, and denser transport.
pub fn default_city_params(city: &str, seed: u64) -> Option<SyntheticCityParams> {
    let (area, phi, lambda) = match city {
        "Birmingham" => ("B", 52.4862, -1.8904),
        "Bristol" => ("BS", 51.4545, -2.5879),
        "Cardiff" => ("CF", 51.4816, -3.1791),
        "Edinburgh" => ("EH", 55.9533, -3.1883),
        "Glasgow" => ("G", 55.8642, -4.2518),
        "London" => ("E", 51.5074, -0.1278),
        "Manchester" => ("M", 53.4808, -2.2426),
        "Milton Keynes" => ("MK", 52.0406, -0.7594),
        "Newcastle" => ("NE", 54.9783, -1.6178),
        "Nottingham" => ("NG", 52.9548, -1.1581),
        _ => return None,
    };
    let mut p = SyntheticCityParams::new(seed, city, area, GeoPoint { phi, lambda });
    let prof = &mut p.profile;
    match city {
        "Birmingham" => {
            prof.quality_mean = 0.36;
            prof.quality_sd = 0.07;
        }
        "London" => {
            prof.quality_mean = 0.50;
            prof.quality_sd = 0.18;
            prof.stop_density = 3.0;
            prof.tariff_share = 0.6;
        }
        "Milton Keynes" => {
            prof.quality_mean = 0.52;
            prof.quality_sd = 0.12;
            prof.stop_density = 1.6;
        }
        "Glasgow" | "Newcastle" => {
            prof.quality_mean = 0.38;
        }
        "Bristol" | "Edinburgh" => {
            prof.quality_mean = 0.45;
            prof.stop_density = 1.5;
        }
        _ => {}
    }
    Some(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationParams {
    pub cities: Vec<SyntheticCityParams>,
    pub margin: f64,
    pub alpha: f64,
    /// Added to every interpolated score before testing. Zero for a real run;
    /// non-zero builds a counterexample the test must reject.
    pub inject_shift: f64,
}

impl ValidationParams {
    /// Ten default cities of 1000 addresses, seeded from `base_seed`.
    pub fn defaults(base_seed: u64) -> Self {
        Self::for_cities(&DEFAULT_CITIES, base_seed).expect("default cities are known")
    }

    pub fn for_cities(cities: &[&str], base_seed: u64) -> Result<Self, ValidateError> {
        let cities = cities
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let known = DEFAULT_CITIES.iter().position(|d| d.eq_ignore_ascii_case(c));
                let name = known.map(|k| DEFAULT_CITIES[k]).unwrap_or(c);
                default_city_params(name, base_seed.wrapping_add(i as u64 * 7919))
                    .ok_or_else(|| ValidateError::Config(format!("no synthetic profile for city {c:?}")))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            cities,
            margin: DEFAULT_MARGIN,
            alpha: DEFAULT_ALPHA,
            inject_shift: 0.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreGroup {
    /// G1: scored from neighbors.
    Interpolated,
    /// G2: scored from the dwelling's own certificate.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredListing {
    pub listing: Listing,
    pub report: EcoGradeReport,
    pub group: ScoreGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    pub group: String,
    pub n_interpolated: usize,
    pub n_direct: usize,
    pub mean_interpolated: Option<f64>,
    pub mean_direct: Option<f64>,
    /// |mean_interpolated − mean_direct| when both exist.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub by_city: Vec<GroupMeans>,
    pub by_bed_type: Vec<GroupMeans>,
    pub tost: TostResult,
    pub inject_shift: f64,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRun {
    pub report: ValidationReport,
    pub scored: Vec<ScoredListing>,
}

/// Score one generated city into the two comparison groups. Listings with
/// no usable certificate evidence are reported in `diagnostics`.
pub fn score_city(city: &SyntheticCity, scorer: &Scorer, diagnostics: &mut Vec<String>) -> Vec<ScoredListing> {
    let config = &scorer.config;
    let cleaned = clean_records(city.certificates.clone(), &CleaningRules::default());
    let index = EpcIndex::build(dedupe_by_address(cleaned.kept));
    let transport = city.transport();
    let mut rng = ChaCha8Rng::seed_from_u64(city.params.seed ^ 0xA5A5_5A5A);
    let mut out = Vec::with_capacity(city.listings.len());
    for listing in &city.listings {
        let (evidence, area, group) = if let Some(r) = find_direct(listing, &index) {
            (CertificateEvidence::from_direct(r), None, ScoreGroup::Direct)
        } else {
            match find_neighbors(listing, &index, &config.bedrooms, config.min_similar) {
                Ok(n) => {
                    let area = assign_random_area(&n.records, &mut rng).ok();
                    match CertificateEvidence::from_neighbors(&n.records, n.widened) {
                        Ok(e) => (e, area, ScoreGroup::Interpolated),
                        Err(e) => {
                            diagnostics.push(format!("{}: {e}", listing.id));
                            continue;
                        }
                    }
                }
                Err(e) => {
                    diagnostics.push(format!("{}: {e}", listing.id));
                    continue;
                }
            }
        };
        match scorer.score_with_evidence(listing, Some(&evidence), &transport, area) {
            Ok(report) => out.push(ScoredListing {
                listing: listing.clone(),
                report,
                group,
            }),
            Err(e) => diagnostics.push(format!("{}: {e}", listing.id)),
        }
    }
    out
}

fn group_means(items: impl Iterator<Item = (String, ScoreGroup, f64)>) -> Vec<GroupMeans> {
    let mut acc: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (k, g, v) in items {
        let e = acc.entry(k).or_default();
        match g {
            ScoreGroup::Interpolated => e.0.push(v),
            ScoreGroup::Direct => e.1.push(v),
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    acc.into_iter()
        .map(|(group, (g1, g2))| {
            let (m1, m2) = (mean(&g1), mean(&g2));
            GroupMeans {
                group,
                n_interpolated: g1.len(),
                n_direct: g2.len(),
                mean_interpolated: m1,
                mean_direct: m2,
                gap: m1.zip(m2).map(|(a, b)| (a - b).abs()),
            }
        })
        .collect()
}

/// Generate, score, and compare every city.
pub fn run_validation(params: &ValidationParams, scorer: &Scorer) -> Result<ValidationRun, ValidateError> {
    let mut diagnostics = Vec::new();
    let mut scored = Vec::new();
    for city_params in &params.cities {
        let city = generate_city(city_params, &scorer.config.bedrooms)?;
        if city.listings.is_empty() {
            diagnostics.push(format!("{}: no addresses, city omitted", city_params.city));
            continue;
        }
        scored.extend(score_city(&city, scorer, &mut diagnostics));
    }

    let value = |s: &ScoredListing| match s.group {
        ScoreGroup::Interpolated => s.report.overall + params.inject_shift,
        ScoreGroup::Direct => s.report.overall,
    };
    let g1: Vec<f64> = scored
        .iter()
        .filter(|s| s.group == ScoreGroup::Interpolated)
        .map(value)
        .collect();
    let g2: Vec<f64> = scored
        .iter()
        .filter(|s| s.group == ScoreGroup::Direct)
        .map(value)
        .collect();
    let tost = tost_equivalence(&g1, &g2, params.margin, params.alpha)?;

    let by_city = group_means(scored.iter().map(|s| (s.listing.city.clone(), s.group, value(s))));
    let by_bed_type = group_means(scored.iter().map(|s| {
        let bed = s
            .listing
            .bedrooms
            .map(|b| b.to_string())
            .unwrap_or_else(|| "unknown".into());
        (bed, s.group, value(s))
    }));

    Ok(ValidationRun {
        report: ValidationReport {
            by_city,
            by_bed_type,
            tost,
            inject_shift: params.inject_shift,
            diagnostics,
        },
        scored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, shift: f64) -> ValidationParams {
        let mut p = ValidationParams::for_cities(&["Bristol", "Cardiff"], seed).unwrap();
        for c in &mut p.cities {
            c.n_addresses = 400;
        }
        p.inject_shift = shift;
        p
    }

    #[test]
    fn small_run_is_equivalent_and_deterministic() {
        let scorer = Scorer::default();
        let a = run_validation(&small(5, 0.0), &scorer).unwrap();
        let b = run_validation(&small(5, 0.0), &scorer).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.report.by_city.len(), 2);
        assert!(a.report.tost.equivalent, "{:?}", a.report.tost);
    }

    #[test]
    fn shift_breaks_equivalence() {
        let run = run_validation(&small(5, 0.5), &Scorer::default()).unwrap();
        assert!(!run.report.tost.equivalent);
    }

    #[test]
    fn empty_city_is_omitted() {
        let mut p = small(5, 0.0);
        p.cities[1].n_addresses = 0;
        let run = run_validation(&p, &Scorer::default()).unwrap();
        assert_eq!(run.report.by_city.len(), 1);
        assert!(run.report.diagnostics.iter().any(|d| d.contains("Cardiff")));
    }

    #[test]
    fn full_coverage_never_interpolates() {
        let mut p = small(9, 0.0);
        p.cities.truncate(1);
        p.cities[0].epc_coverage_fraction = 1.0;
        let city = generate_city(&p.cities[0], &Scorer::default().config.bedrooms).unwrap();
        let mut diags = Vec::new();
        let scored = score_city(&city, &Scorer::default(), &mut diags);
        assert!(scored.iter().all(|s| s.group == ScoreGroup::Direct));
        assert_eq!(scored.len(), city.listings.len());
    }

    #[test]
    fn unknown_city_is_config_error() {
        assert!(matches!(
            ValidationParams::for_cities(&["Atlantis"], 1),
            Err(ValidateError::Config(_))
        ));
    }
}
