//! Deterministic synthetic cities: listings, certificates with deliberate
//! coverage holes, and transport points.
//!
//! Dwellings in one postcode share a latent quality, so their certificates
//! are informative about each other. The latent quality drives the surveyed
//! bands and the kWh/m² figure; which dwellings get a certificate is chosen
//! independently of quality.

use chrono::{DateTime, Duration, NaiveDate, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{MatchError, ValidateError};
use crate::geo::{GeoPoint, Snapshot, TransportMode, TransportPoint, EARTH_RADIUS_KM};
use crate::ingest::BedroomLookupTable;
use crate::model::{normalize_address, Bands, EfficiencyBand, EpcAttribute, EpcRecord, Listing, RatingLetter, Tariff};
use crate::score::TransportData;

/// Shape of a city's housing stock and transport network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityProfile {
    /// Mean postcode quality on [0, 1].
    pub quality_mean: f64,
    /// Spread of quality between postcodes.
    pub quality_sd: f64,
    /// Spread of quality between dwellings within one postcode.
    pub within_sd: f64,
    /// Per-attribute noise around a dwelling's quality, in band steps.
    pub band_noise: f64,
    /// kWh/m² at quality 0 and quality 1.
    pub kwh_at_worst: f64,
    pub kwh_at_best: f64,
    pub kwh_noise: f64,
    /// Transport points per km² of the city disc.
    pub stop_density: f64,
    pub radius_km: f64,
    /// Share of listings with known tariff data.
    pub tariff_share: f64,
    pub gas_share: f64,
}

impl Default for CityProfile {
    fn default() -> Self {
        Self {
            quality_mean: 0.42,
            quality_sd: 0.12,
            within_sd: 0.05,
            band_noise: 0.45,
            kwh_at_worst: 420.0,
            kwh_at_best: 90.0,
            kwh_noise: 20.0,
            stop_density: 1.2,
            radius_km: 6.0,
            tariff_share: 0.4,
            gas_share: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostcodeGeometry {
    /// Outward-code districts in the city.
    pub districts: usize,
    pub addresses_per_postcode: usize,
}

impl Default for PostcodeGeometry {
    fn default() -> Self {
        Self {
            districts: 8,
            addresses_per_postcode: 14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCityParams {
    pub seed: u64,
    pub city: String,
    /// Outward-code prefix, e.g. "B" or "MK".
    pub postcode_area: String,
    pub centre: GeoPoint,
    pub n_addresses: usize,
    pub epc_coverage_fraction: f64,
    pub profile: CityProfile,
    pub geometry: PostcodeGeometry,
}

impl SyntheticCityParams {
    pub fn new(seed: u64, city: &str, postcode_area: &str, centre: GeoPoint) -> Self {
        Self {
            seed,
            city: city.to_string(),
            postcode_area: postcode_area.to_string(),
            centre,
            n_addresses: 1000,
            epc_coverage_fraction: 0.7,
            profile: CityProfile::default(),
            geometry: PostcodeGeometry::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ValidateError> {
        let p = &self.profile;
        if !(0.0..=1.0).contains(&self.epc_coverage_fraction) {
            return Err(ValidateError::Config(format!(
                "epc_coverage_fraction {} outside [0, 1]",
                self.epc_coverage_fraction
            )));
        }
        for (name, v) in [
            ("tariff_share", p.tariff_share),
            ("gas_share", p.gas_share),
            ("quality_mean", p.quality_mean),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ValidateError::Config(format!("{name} {v} outside [0, 1]")));
            }
        }
        for (name, v) in [
            ("quality_sd", p.quality_sd),
            ("within_sd", p.within_sd),
            ("band_noise", p.band_noise),
            ("kwh_noise", p.kwh_noise),
        ] {
            if !(v >= 0.0) {
                return Err(ValidateError::Config(format!("{name} must be non-negative")));
            }
        }
        if !(p.radius_km > 0.0 && p.stop_density > 0.0) {
            return Err(ValidateError::Config(
                "radius_km and stop_density must be positive".into(),
            ));
        }
        if self.geometry.districts == 0 || self.geometry.addresses_per_postcode == 0 {
            return Err(ValidateError::Config("postcode geometry must be non-empty".into()));
        }
        Ok(())
    }
}

/// A generated city. `has_certificate[i]` tells whether listing `i` has its
/// own certificate in `certificates`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCity {
    pub params: SyntheticCityParams,
    pub listings: Vec<Listing>,
    pub certificates: Vec<EpcRecord>,
    pub has_certificate: Vec<bool>,
    pub fixed_transport: Vec<TransportPoint>,
    pub snapshots: Vec<Snapshot>,
}

impl SyntheticCity {
    pub fn transport(&self) -> TransportData {
        TransportData {
            fixed: self.fixed_transport.clone(),
            snapshots: self.snapshots.clone(),
        }
    }
}

const STREETS: [&str; 12] = [
    "Albert", "Victoria", "Station", "Church", "Park", "Mill", "Queen", "King", "Manor", "Grove", "Canal", "Chapel",
];
const STREET_KINDS: [&str; 4] = ["Road", "Street", "Avenue", "Lane"];
const INWARD_LETTERS: &[u8] = b"ABDEFGHJLNPQRSTUWXYZ";

/// Bedroom mix: studio through 5-bed.
const BEDROOM_WEIGHTS: [f64; 6] = [0.14, 0.34, 0.30, 0.15, 0.05, 0.02];

/// Per-attribute offset in band steps (lighting tends to score well,
/// walls and floors poorly).
fn attribute_offset(a: EpcAttribute) -> f64 {
    match a {
        EpcAttribute::HotWater => 0.3,
        EpcAttribute::Floor => -0.4,
        EpcAttribute::Windows => 0.2,
        EpcAttribute::Walls => -0.5,
        EpcAttribute::SecondaryHeating => -0.2,
        EpcAttribute::Roof => -0.1,
        EpcAttribute::MainHeat => 0.3,
        EpcAttribute::MainHeatControl => 0.2,
        EpcAttribute::Lighting => 0.6,
    }
}

fn offset_point(centre: GeoPoint, north_km: f64, east_km: f64) -> GeoPoint {
    let dphi = (north_km / EARTH_RADIUS_KM).to_degrees();
    let dlambda = (east_km / (EARTH_RADIUS_KM * centre.phi.to_radians().cos())).to_degrees();
    GeoPoint {
        phi: (centre.phi + dphi).clamp(-90.0, 90.0),
        lambda: (centre.lambda + dlambda).clamp(-180.0, 180.0),
    }
}

fn random_in_disc(rng: &mut impl Rng, centre: GeoPoint, radius_km: f64) -> GeoPoint {
    let r = radius_km * rng.random::<f64>().sqrt();
    let theta = rng.random::<f64>() * std::f64::consts::TAU;
    offset_point(centre, r * theta.sin(), r * theta.cos())
}

fn pick_weighted(rng: &mut impl Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn rating_for_kwh(kwh: f64) -> RatingLetter {
    match kwh {
        k if k < 100.0 => RatingLetter::A,
        k if k < 150.0 => RatingLetter::B,
        k if k < 200.0 => RatingLetter::C,
        k if k < 260.0 => RatingLetter::D,
        k if k < 320.0 => RatingLetter::E,
        k if k < 380.0 => RatingLetter::F,
        _ => RatingLetter::G,
    }
}

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("finite, non-negative sd")
}

/// Generate a city. The same parameters always yield the same city.
pub fn generate_city(
    params: &SyntheticCityParams,
    bedrooms: &BedroomLookupTable,
) -> Result<SyntheticCity, ValidateError> {
    params.validate()?;
    let rows = bedrooms
        .rows(&params.city)
        .ok_or_else(|| ValidateError::Config(format!("no bedroom table rows for {}", params.city)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let p = &params.profile;
    let n = params.n_addresses;
    let per_pc = params.geometry.addresses_per_postcode;
    let n_postcodes = n.div_ceil(per_pc);

    struct PostcodeInfo {
        code: String,
        quality: f64,
        centroid: GeoPoint,
    }
    let mut postcodes = Vec::with_capacity(n_postcodes);
    let quality = normal(p.quality_mean, p.quality_sd);
    for i in 0..n_postcodes {
        let district = i % params.geometry.districts + 1;
        let sector = (i / params.geometry.districts) % 10;
        let k = i / (params.geometry.districts * 10);
        let l1 = INWARD_LETTERS[k % INWARD_LETTERS.len()] as char;
        let l2 = INWARD_LETTERS[(k / INWARD_LETTERS.len()) % INWARD_LETTERS.len()] as char;
        postcodes.push(PostcodeInfo {
            code: format!("{}{} {}{}{}", params.postcode_area, district, sector, l2, l1),
            quality: quality.sample(&mut rng).clamp(0.02, 0.98),
            centroid: random_in_disc(&mut rng, params.centre, p.radius_km * 0.9),
        });
    }

    let within = normal(0.0, p.within_sd);
    let band_noise = normal(0.0, p.band_noise);
    let kwh_noise = normal(0.0, p.kwh_noise);
    let epoch = NaiveDate::from_ymd_opt(2012, 1, 1).expect("valid date");

    let mut listings = Vec::with_capacity(n);
    let mut all_certs = Vec::with_capacity(n);
    for i in 0..n {
        let pc = &postcodes[i / per_pc];
        let z = (pc.quality + within.sample(&mut rng)).clamp(0.0, 1.0);
        let beds = pick_weighted(&mut rng, &BEDROOM_WEIGHTS) as u8;
        let row = rows
            .iter()
            .find(|r| r.bedrooms == beds)
            .unwrap_or(&rows[rows.len() - 1]);
        let hi = row.area_high.min(row.area_low * 1.6);
        let area = rng.random_range(row.area_low..hi);

        let mut bands = Bands::new();
        for attr in EpcAttribute::ALL {
            // roofs and floors are often not assessed for mid-block flats
            if matches!(attr, EpcAttribute::Roof | EpcAttribute::Floor) && rng.random::<f64>() < 0.25 {
                continue;
            }
            let steps = (z * 4.0 + attribute_offset(attr) + band_noise.sample(&mut rng))
                .round()
                .clamp(0.0, 4.0);
            bands.insert(attr, EfficiencyBand::ALL[steps as usize]);
        }
        let kwh = (p.kwh_at_worst + (p.kwh_at_best - p.kwh_at_worst) * z + kwh_noise.sample(&mut rng)).max(25.0);
        let gas = rng.random::<f64>() < p.gas_share;

        let street = STREETS[(i / per_pc) % STREETS.len()];
        let kind = STREET_KINDS[(i / per_pc / STREETS.len()) % STREET_KINDS.len()];
        let address = format!("Flat {}, {} {street} {kind}", i % per_pc + 1, i / per_pc + 1);

        all_certs.push(EpcRecord {
            address_key: normalize_address(&address),
            postcode: pc.code.clone(),
            floor_area: (area * 10.0).round() / 10.0,
            bands,
            kwh_per_m2: kwh.round(),
            lodgement_date: epoch + Duration::days(rng.random_range(0..4000)),
            headline_rating: Some(rating_for_kwh(kwh)),
            main_fuel: Some(if gas { "mains gas" } else { "electricity" }.into()),
        });

        let tariff = (rng.random::<f64>() < p.tariff_share).then(|| Tariff {
            renewable_fraction: [0.0, 0.25, 0.5, 1.0][rng.random_range(0..4)],
            gas_main_heat: gas,
        });
        let loc = offset_point(
            pc.centroid,
            rng.random_range(-0.08..0.08),
            rng.random_range(-0.08..0.08),
        );
        listings.push(Listing {
            id: format!("{}-{:04}", params.city.to_lowercase().replace(' ', "-"), i),
            address_key: address,
            postcode: pc.code.clone(),
            latitude: loc.phi,
            longitude: loc.lambda,
            bedrooms: Some(beds),
            city: params.city.clone(),
            tariff,
            meter_kwh_per_m2: None,
        });
    }

    let n_covered = (n as f64 * params.epc_coverage_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut has_certificate = vec![false; n];
    for &i in &order[..n_covered] {
        has_certificate[i] = true;
    }
    let certificates = all_certs
        .into_iter()
        .zip(&has_certificate)
        .filter_map(|(c, has)| has.then_some(c))
        .collect();

    let area_km2 = std::f64::consts::PI * p.radius_km * p.radius_km;
    let n_stops = (area_km2 * p.stop_density).round() as usize;
    let mut fixed_transport = Vec::new();
    for (mode, share) in [
        (TransportMode::BusStop, 1.0),
        (TransportMode::MetroStation, 0.15),
        (TransportMode::BikeShare, 0.4),
    ] {
        for _ in 0..((n_stops as f64 * share).round() as usize).max(1) {
            fixed_transport.push(TransportPoint {
                location: random_in_disc(&mut rng, params.centre, p.radius_km),
                mode,
                observed_at: None,
            });
        }
    }

    let week_start: DateTime<Utc> = DateTime::from_naive_utc_and_offset(
        NaiveDate::from_ymd_opt(2024, 5, 6)
            .expect("valid")
            .and_hms_opt(8, 0, 0)
            .expect("valid"),
        Utc,
    );
    let mut snapshots = Vec::new();
    for k in 0..3 {
        let at = week_start + Duration::hours(k * 57);
        let points = (0..((n_stops as f64 * 0.3).round() as usize).max(1))
            .map(|_| TransportPoint {
                location: random_in_disc(&mut rng, params.centre, p.radius_km),
                mode: TransportMode::EScooter,
                observed_at: Some(at),
            })
            .collect();
        snapshots.push(Snapshot {
            captured_at: at,
            points,
        });
    }

    Ok(SyntheticCity {
        params: params.clone(),
        listings,
        certificates,
        has_certificate,
        fixed_transport,
        snapshots,
    })
}

/// Uniform floor area between the smallest and largest neighbor.
pub fn assign_random_area(neighbors: &[&EpcRecord], rng: &mut impl Rng) -> Result<f64, MatchError> {
    let (lo, hi) = neighbors
        .iter()
        .map(|r| r.floor_area)
        .fold(None, |acc: Option<(f64, f64)>, a| match acc {
            None => Some((a, a)),
            Some((lo, hi)) => Some((lo.min(a), hi.max(a))),
        })
        .ok_or_else(|| MatchError::NoComparableData("no neighbors with a floor area".into()))?;
    if lo == hi {
        return Ok(lo);
    }
    Ok(rng.random_range(lo..=hi))
}
