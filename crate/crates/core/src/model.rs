//! Shared domain types.
//!
//! Every value here is immutable once built and serializes to the canonical
//! JSON form documented under `schemas/`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Surveyed efficiency of one certificate attribute.
///
/// Variants are declared worst-first so the derived `Ord` matches the
/// quality order (`VeryPoor < Poor < Average < Good < VeryGood`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfficiencyBand {
    VeryPoor,
    Poor,
    Average,
    Good,
    VeryGood,
}

impl EfficiencyBand {
    pub const ALL: [EfficiencyBand; 5] = [
        EfficiencyBand::VeryPoor,
        EfficiencyBand::Poor,
        EfficiencyBand::Average,
        EfficiencyBand::Good,
        EfficiencyBand::VeryGood,
    ];

    /// Numeric value of the band on the unit interval.
    pub fn score(self) -> f64 {
        band_to_score(self)
    }

    /// The next band up, or `None` for `VeryGood`.
    pub fn improved(self) -> Option<EfficiencyBand> {
        match self {
            EfficiencyBand::VeryPoor => Some(EfficiencyBand::Poor),
            EfficiencyBand::Poor => Some(EfficiencyBand::Average),
            EfficiencyBand::Average => Some(EfficiencyBand::Good),
            EfficiencyBand::Good => Some(EfficiencyBand::VeryGood),
            EfficiencyBand::VeryGood => None,
        }
    }

    /// Highest band whose score does not exceed `score`.
    ///
    /// Used to present an interpolated attribute mean as a band.
    pub fn from_score_floor(score: f64) -> EfficiencyBand {
        EfficiencyBand::ALL
            .iter()
            .rev()
            .copied()
            .find(|b| b.score() <= score + 1e-12)
            .unwrap_or(EfficiencyBand::VeryPoor)
    }

    pub fn label(self) -> &'static str {
        match self {
            EfficiencyBand::VeryPoor => "very poor",
            EfficiencyBand::Poor => "poor",
            EfficiencyBand::Average => "average",
            EfficiencyBand::Good => "good",
            EfficiencyBand::VeryGood => "very good",
        }
    }
}

impl fmt::Display for EfficiencyBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EfficiencyBand {
    type Err = ModelError;

    /// Accepts the export spellings ("Very Good", "very-good", "VERY_GOOD").
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .map(|c| {
                if c == '-' || c == '_' {
                    ' '
                } else {
                    c.to_ascii_lowercase()
                }
            })
            .collect();
        let norm = norm.split_whitespace().collect::<Vec<_>>().join(" ");
        match norm.as_str() {
            "very good" => Ok(EfficiencyBand::VeryGood),
            "good" => Ok(EfficiencyBand::Good),
            "average" => Ok(EfficiencyBand::Average),
            "poor" => Ok(EfficiencyBand::Poor),
            "very poor" => Ok(EfficiencyBand::VeryPoor),
            _ => Err(ModelError::UnknownBand(s.to_string())),
        }
    }
}

/// Maps a band onto {0, 0.25, 0.5, 0.75, 1}.
pub fn band_to_score(band: EfficiencyBand) -> f64 {
    match band {
        EfficiencyBand::VeryGood => 1.0,
        EfficiencyBand::Good => 0.75,
        EfficiencyBand::Average => 0.5,
        EfficiencyBand::Poor => 0.25,
        EfficiencyBand::VeryPoor => 0.0,
    }
}

/// The nine surveyed certificate attributes that feed the efficiency factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpcAttribute {
    HotWater,
    Floor,
    Windows,
    Walls,
    SecondaryHeating,
    Roof,
    MainHeat,
    MainHeatControl,
    Lighting,
}

impl EpcAttribute {
    pub const ALL: [EpcAttribute; 9] = [
        EpcAttribute::HotWater,
        EpcAttribute::Floor,
        EpcAttribute::Windows,
        EpcAttribute::Walls,
        EpcAttribute::SecondaryHeating,
        EpcAttribute::Roof,
        EpcAttribute::MainHeat,
        EpcAttribute::MainHeatControl,
        EpcAttribute::Lighting,
    ];

    /// Column name in the open-data export, normalized to lower snake case.
    pub fn export_column(self) -> &'static str {
        match self {
            EpcAttribute::HotWater => "hot_water_energy_eff",
            EpcAttribute::Floor => "floor_energy_eff",
            EpcAttribute::Windows => "windows_energy_eff",
            EpcAttribute::Walls => "walls_energy_eff",
            EpcAttribute::SecondaryHeating => "sheating_energy_eff",
            EpcAttribute::Roof => "roof_energy_eff",
            EpcAttribute::MainHeat => "mainheat_energy_eff",
            EpcAttribute::MainHeatControl => "mainheatc_energy_eff",
            EpcAttribute::Lighting => "lighting_energy_eff",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            EpcAttribute::HotWater => "hot_water",
            EpcAttribute::Floor => "floor",
            EpcAttribute::Windows => "windows",
            EpcAttribute::Walls => "walls",
            EpcAttribute::SecondaryHeating => "secondary_heating",
            EpcAttribute::Roof => "roof",
            EpcAttribute::MainHeat => "main_heat",
            EpcAttribute::MainHeatControl => "main_heat_control",
            EpcAttribute::Lighting => "lighting",
        }
    }
}

impl fmt::Display for EpcAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Headline certificate letter. Declared best-first, so `G` is the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RatingLetter {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl FromStr for RatingLetter {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(RatingLetter::A),
            "B" => Ok(RatingLetter::B),
            "C" => Ok(RatingLetter::C),
            "D" => Ok(RatingLetter::D),
            "E" => Ok(RatingLetter::E),
            "F" => Ok(RatingLetter::F),
            "G" => Ok(RatingLetter::G),
            _ => Err(ModelError::UnknownRating(s.to_string())),
        }
    }
}

impl fmt::Display for RatingLetter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Uppercase, strip punctuation, collapse whitespace.
pub fn normalize_address(raw: &str) -> String {
    raw.chars()
        .filter_map(|c| {
            if c.is_alphanumeric() {
                Some(c.to_ascii_uppercase())
            } else if c.is_whitespace() || c == '-' || c == '/' || c == ',' {
                Some(' ')
            } else {
                None
            }
        })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Canonical postcode form: uppercase, single space before the inward code.
///
/// UK inward codes are always three characters, so a postcode typed without
/// a space ("SW1A1AA") is split before its last three characters.
pub fn normalize_postcode(raw: &str) -> String {
    let compact: String = raw
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_uppercase())
        .collect();
    if compact.len() > 3 {
        let (outward, inward) = compact.split_at(compact.len() - 3);
        format!("{outward} {inward}")
    } else {
        compact
    }
}

/// The district part of a postcode (before the space).
pub fn outward_code(postcode: &str) -> String {
    let norm = normalize_postcode(postcode);
    norm.split(' ').next().unwrap_or_default().to_string()
}

/// Identity of a dwelling: normalized address plus normalized postcode.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AddressKey {
    pub address: String,
    pub postcode: String,
}

impl AddressKey {
    pub fn new(address: &str, postcode: &str) -> Self {
        Self {
            address: normalize_address(address),
            postcode: normalize_postcode(postcode),
        }
    }
}

impl fmt::Display for AddressKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}", self.address, self.postcode)
    }
}

pub type Bands = BTreeMap<EpcAttribute, EfficiencyBand>;

/// One energy performance certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpcRecord {
    pub address_key: String,
    pub postcode: String,
    pub floor_area: f64,
    #[serde(default)]
    pub bands: Bands,
    pub kwh_per_m2: f64,
    pub lodgement_date: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub headline_rating: Option<RatingLetter>,
    /// Free-text main fuel from the export, when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub main_fuel: Option<String>,
}

impl EpcRecord {
    pub fn key(&self) -> AddressKey {
        AddressKey::new(&self.address_key, &self.postcode)
    }

    pub fn outward(&self) -> String {
        outward_code(&self.postcode)
    }

    pub fn uses_gas(&self) -> bool {
        self.main_fuel
            .as_deref()
            .is_some_and(|f| f.to_ascii_lowercase().contains("gas"))
    }

    /// Stable content hash (hex SHA-256 of the canonical JSON form).
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("record serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// Energy tariff facts for a listing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tariff {
    pub renewable_fraction: f64,
    #[serde(default)]
    pub gas_main_heat: bool,
}

/// A rentable property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Listing {
    pub id: String,
    pub address_key: String,
    pub postcode: String,
    pub latitude: f64,
    pub longitude: f64,
    #[serde(default)]
    pub bedrooms: Option<u8>,
    pub city: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tariff: Option<Tariff>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meter_kwh_per_m2: Option<f64>,
}

impl Listing {
    pub fn key(&self) -> AddressKey {
        AddressKey::new(&self.address_key, &self.postcode)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(-90.0..=90.0).contains(&self.latitude) || !(-180.0..=180.0).contains(&self.longitude) {
            return Err(ModelError::Coordinates {
                lat: self.latitude,
                lon: self.longitude,
            });
        }
        if let Some(t) = &self.tariff {
            if !(0.0..=1.0).contains(&t.renewable_fraction) {
                return Err(ModelError::RenewableFraction(t.renewable_fraction));
            }
        }
        if let Some(m) = self.meter_kwh_per_m2 {
            if !(m >= 0.0) {
                return Err(ModelError::NegativeMeter(m));
            }
        }
        Ok(())
    }
}

/// The four EcoGrade factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Consumption,
    Efficiency,
    Supplier,
    Transport,
}

impl Factor {
    pub const ALL: [Factor; 4] = [
        Factor::Consumption,
        Factor::Efficiency,
        Factor::Supplier,
        Factor::Transport,
    ];
}

/// Per-factor subscores on the 0–5 scale; `None` marks an unavailable factor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FactorScores {
    pub consumption: Option<f64>,
    pub efficiency: Option<f64>,
    pub supplier: Option<f64>,
    pub transport: Option<f64>,
}

impl FactorScores {
    pub fn get(&self, f: Factor) -> Option<f64> {
        match f {
            Factor::Consumption => self.consumption,
            Factor::Efficiency => self.efficiency,
            Factor::Supplier => self.supplier,
            Factor::Transport => self.transport,
        }
    }

    pub fn set(&mut self, f: Factor, v: Option<f64>) {
        match f {
            Factor::Consumption => self.consumption = v,
            Factor::Efficiency => self.efficiency = v,
            Factor::Supplier => self.supplier = v,
            Factor::Transport => self.transport = v,
        }
    }

    pub fn present(&self) -> impl Iterator<Item = (Factor, f64)> + '_ {
        Factor::ALL.into_iter().filter_map(|f| self.get(f).map(|v| (f, v)))
    }

    pub fn missing(&self) -> Vec<Factor> {
        Factor::ALL.into_iter().filter(|f| self.get(*f).is_none()).collect()
    }
}

/// Where a report's consumption and CO₂ figures came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Direct,
    Interpolated {
        n_neighbors: usize,
        widened: bool,
    },
    Meter,
    /// No certificate or meter data; only supplier and transport factors.
    NoCertificate,
}

/// Summary statistics of a sample (n−1 standard deviation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub mu: f64,
    pub sigma: f64,
    pub n: usize,
}

impl SampleStats {
    /// `None` for an empty slice. A single value gets `sigma = 0`.
    pub fn from_values(values: &[f64]) -> Option<SampleStats> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mu = values.iter().sum::<f64>() / n as f64;
        let sigma = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mu).powi(2)).sum();
            (ss / (n as f64 - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(SampleStats { mu, sigma, n })
    }

    /// True when `sigma` is a placeholder for a single observation.
    pub fn sigma_undefined(&self) -> bool {
        self.n < 2
    }
}

/// Per-listing scoring output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcoGradeReport {
    pub listing_id: String,
    pub factor_scores: FactorScores,
    pub overall: f64,
    pub leaves: u8,
    /// Tonnes CO₂ per year; `None` when no consumption data exists.
    pub co2_avg: Option<f64>,
    pub co2_low: Option<f64>,
    pub co2_high: Option<f64>,
    pub provenance: Provenance,
    pub missing_factors: Vec<Factor>,
    /// Attribute scores on [0,1] that fed the efficiency factor.
    #[serde(default)]
    pub feature_scores: BTreeMap<EpcAttribute, f64>,
    /// True when attribute scores were averaged from neighboring certificates.
    #[serde(default)]
    pub features_inferred: bool,
    /// Per-certificate CO₂ values behind `co2_avg` (apartment-side sample).
    pub co2_sample: Option<SampleStats>,
    /// Floor area used for CO₂, m².
    pub floor_area: Option<f64>,
}

/// Per (city, bed type) CO₂ statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityBaseline {
    pub city: String,
    pub bed_type: u8,
    pub c_mu: f64,
    pub c_sigma: f64,
    pub c_n: usize,
}

impl CityBaseline {
    pub fn stats(&self) -> SampleStats {
        SampleStats {
            mu: self.c_mu,
            sigma: self.c_sigma,
            n: self.c_n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_scores_are_exact() {
        assert_eq!(band_to_score(EfficiencyBand::VeryGood), 1.0);
        assert_eq!(band_to_score(EfficiencyBand::Good), 0.75);
        assert_eq!(band_to_score(EfficiencyBand::Average), 0.5);
        assert_eq!(band_to_score(EfficiencyBand::Poor), 0.25);
        assert_eq!(band_to_score(EfficiencyBand::VeryPoor), 0.0);
    }

    #[test]
    fn band_score_is_strictly_monotone() {
        for w in EfficiencyBand::ALL.windows(2) {
            assert!(w[0] < w[1]);
            assert!(w[0].score() < w[1].score());
        }
    }

    #[test]
    fn parses_export_spellings() {
        assert_eq!("Very Good".parse::<EfficiencyBand>().unwrap(), EfficiencyBand::VeryGood);
        assert_eq!("VERY_POOR".parse::<EfficiencyBand>().unwrap(), EfficiencyBand::VeryPoor);
        assert_eq!(" average ".parse::<EfficiencyBand>().unwrap(), EfficiencyBand::Average);
        assert!("N/A".parse::<EfficiencyBand>().is_err());
    }

    #[test]
    fn floor_band_from_score() {
        assert_eq!(EfficiencyBand::from_score_floor(0.6), EfficiencyBand::Average);
        assert_eq!(EfficiencyBand::from_score_floor(0.75), EfficiencyBand::Good);
        assert_eq!(EfficiencyBand::from_score_floor(0.0), EfficiencyBand::VeryPoor);
        assert_eq!(EfficiencyBand::from_score_floor(1.0), EfficiencyBand::VeryGood);
    }

    #[test]
    fn address_normalization() {
        assert_eq!(normalize_address("  Flat 2,  10 High St. "), "FLAT 2 10 HIGH ST");
        assert_eq!(normalize_address("O'Neil Court, 10-12"), "ONEIL COURT 10 12");
        assert_eq!(normalize_postcode("sw1a1aa"), "SW1A 1AA");
        assert_eq!(normalize_postcode("SW1A  1AA"), "SW1A 1AA");
        assert_eq!(outward_code("b1 1aa"), "B1");
        assert_eq!(
            AddressKey::new("flat 1, 3 Elm rd", "n1 9gu"),
            AddressKey::new("FLAT 1 3 ELM RD", "N1 9GU")
        );
    }

    #[test]
    fn rating_order_puts_g_last() {
        assert!(RatingLetter::G > RatingLetter::C);
        assert_eq!("e".parse::<RatingLetter>().unwrap(), RatingLetter::E);
    }

    #[test]
    fn sample_stats_two_points() {
        let s = SampleStats::from_values(&[1.0, 3.0]).unwrap();
        assert_eq!(s.mu, 2.0);
        assert!((s.sigma - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.n, 2);
        assert!(SampleStats::from_values(&[]).is_none());
        assert!(SampleStats::from_values(&[4.0]).unwrap().sigma_undefined());
    }

    #[test]
    fn listing_coordinate_bounds() {
        let mut l = Listing {
            id: "x".into(),
            address_key: "1 A ST".into(),
            postcode: "E1 6AN".into(),
            latitude: 51.5,
            longitude: -0.1,
            bedrooms: Some(1),
            city: "London".into(),
            tariff: None,
            meter_kwh_per_m2: None,
        };
        assert!(l.validate().is_ok());
        l.latitude = 91.0;
        assert!(l.validate().is_err());
    }
}
