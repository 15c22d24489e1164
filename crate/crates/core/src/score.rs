//! The four EcoGrade factors, the 0–5 leaf transform, the overall grade, and
//! CO₂ estimates.
//!
//! Raw factor values live on [0, 1] with 1 best. Each is mapped onto the 0–5
//! scale by [`to_leaf_scale`]; the overall grade is the weighted mean of the
//! factors that are available (equal weights by default).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MatchError, ScoreError};
use crate::geo::{access_summary, GeoPoint, Snapshot, TransportPoint};
use crate::ingest::BedroomLookupTable;
use crate::matching::{find_direct, find_neighbors, interpolate, EpcIndex, InterpolationResult, DEFAULT_MIN_SIMILAR};
use crate::model::{
    EcoGradeReport, EpcAttribute, EpcRecord, Factor, FactorScores, Listing, Provenance, SampleStats, Tariff,
};

/// Multiplier applied to the supplier factor when the main heating burns gas.
pub const GAS_HEAT_PENALTY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafRounding {
    #[default]
    HalfUp,
    Truncate,
}

/// A value per factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerFactor {
    pub consumption: f64,
    pub efficiency: f64,
    pub supplier: f64,
    pub transport: f64,
}

impl PerFactor {
    pub const fn splat(v: f64) -> Self {
        Self {
            consumption: v,
            efficiency: v,
            supplier: v,
            transport: v,
        }
    }

    pub fn get(&self, f: Factor) -> f64 {
        match f {
            Factor::Consumption => self.consumption,
            Factor::Efficiency => self.efficiency,
            Factor::Supplier => self.supplier,
            Factor::Transport => self.transport,
        }
    }

    pub fn set(&mut self, f: Factor, v: f64) {
        match f {
            Factor::Consumption => self.consumption = v,
            Factor::Efficiency => self.efficiency = v,
            Factor::Supplier => self.supplier = v,
            Factor::Transport => self.transport = v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreCalibration {
    pub kwh_floor: f64,
    pub kwh_cap: f64,
    pub walk_cap_hours: f64,
    pub leaf_curve_beta: PerFactor,
    pub weights: PerFactor,
    pub leaf_rounding: LeafRounding,
}

impl Default for ScoreCalibration {
    fn default() -> Self {
        Self {
            kwh_floor: 0.0,
            kwh_cap: 500.0,
            walk_cap_hours: 1.0,
            leaf_curve_beta: PerFactor::splat(9.0),
            weights: PerFactor::splat(1.0),
            leaf_rounding: LeafRounding::HalfUp,
        }
    }
}

impl ScoreCalibration {
    pub fn validate(&self) -> Result<(), ScoreError> {
        if !(self.kwh_floor < self.kwh_cap) {
            return Err(ScoreError::Config("kwh_floor must be below kwh_cap".into()));
        }
        if !(self.walk_cap_hours > 0.0) {
            return Err(ScoreError::Config("walk_cap_hours must be positive".into()));
        }
        for f in Factor::ALL {
            if !(self.leaf_curve_beta.get(f) > 0.0) {
                return Err(ScoreError::Config(format!(
                    "leaf_curve_beta for {f:?} must be positive"
                )));
            }
            if !(self.weights.get(f) > 0.0) {
                return Err(ScoreError::Config(format!("weight for {f:?} must be positive")));
            }
        }
        Ok(())
    }
}

/// kg CO₂e per kWh by fuel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionFactors {
    pub electricity: Option<f64>,
    pub gas: Option<f64>,
    pub effective_year: u16,
}

impl Default for ConversionFactors {
    /// UK 2023 company-reporting factors (grid electricity generation, natural
    /// gas gross CV).
    fn default() -> Self {
        Self {
            electricity: Some(0.20707),
            gas: Some(0.18293),
            effective_year: 2023,
        }
    }
}

impl ConversionFactors {
    pub fn validate(&self) -> Result<(), ScoreError> {
        for (name, v) in [("electricity", self.electricity), ("gas", self.gas)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(ScoreError::Config(format!("{name} conversion factor must be positive")));
                }
            }
        }
        Ok(())
    }
}

/// Share of delivered energy per fuel. Shares sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuelMix {
    pub electricity: f64,
    pub gas: f64,
}

impl FuelMix {
    pub const ELECTRIC: FuelMix = FuelMix {
        electricity: 1.0,
        gas: 0.0,
    };
    pub const GAS_HEATED: FuelMix = FuelMix {
        electricity: 0.5,
        gas: 0.5,
    };

    pub fn for_gas_heat(gas: bool) -> FuelMix {
        if gas {
            FuelMix::GAS_HEATED
        } else {
            FuelMix::ELECTRIC
        }
    }

    /// Blended kg CO₂e per kWh.
    pub fn blended_factor(&self, factors: &ConversionFactors) -> Result<f64, ScoreError> {
        let mut total = 0.0;
        for (share, factor, fuel) in [
            (self.electricity, factors.electricity, "electricity"),
            (self.gas, factors.gas, "gas"),
        ] {
            if share > 0.0 {
                let f = factor.ok_or_else(|| ScoreError::Config(format!("no conversion factor for {fuel}")))?;
                total += share * f;
            }
        }
        Ok(total)
    }
}

/// Lower consumption scores higher: `1 − clamp((kwh − floor)/(cap − floor), 0, 1)`.
pub fn consumption_factor(kwh_per_m2: f64, calib: &ScoreCalibration) -> f64 {
    let t = (kwh_per_m2 - calib.kwh_floor) / (calib.kwh_cap - calib.kwh_floor);
    1.0 - t.clamp(0.0, 1.0)
}

/// Mean of the attribute scores present.
pub fn efficiency_factor(feature_scores: &BTreeMap<EpcAttribute, f64>) -> Result<f64, ScoreError> {
    if feature_scores.is_empty() {
        return Err(ScoreError::FactorUnavailable);
    }
    Ok(feature_scores.values().sum::<f64>() / feature_scores.len() as f64)
}

/// Renewable share of the tariff, halved when the main heating uses gas.
pub fn supplier_factor(tariff: Option<&Tariff>) -> Result<f64, ScoreError> {
    let t = tariff.ok_or(ScoreError::FactorUnavailable)?;
    if !(0.0..=1.0).contains(&t.renewable_fraction) {
        return Err(ScoreError::InvalidInput(format!(
            "renewable fraction {} outside [0, 1]",
            t.renewable_fraction
        )));
    }
    let penalty = if t.gas_main_heat { GAS_HEAT_PENALTY } else { 1.0 };
    Ok(t.renewable_fraction * penalty)
}

/// Linear decay to zero at the walking cap.
pub fn transport_factor(mean_time_hours: f64, calib: &ScoreCalibration) -> f64 {
    (1.0 - mean_time_hours / calib.walk_cap_hours).clamp(0.0, 1.0)
}

/// Map [0,1] onto [0,5] with `5·ln(1 + βx)/ln(1 + β)`.
///
/// The curve is concave, lifting mid-range values; β → 0 recovers `5x`.
pub fn to_leaf_scale(x: f64, beta: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if beta < 1e-12 {
        return 5.0 * x;
    }
    if x == 1.0 {
        return 5.0;
    }
    5.0 * (beta * x).ln_1p() / beta.ln_1p()
}

/// Inverse of [`to_leaf_scale`].
pub fn from_leaf_scale(score: f64, beta: f64) -> f64 {
    let s = score.clamp(0.0, 5.0);
    if beta < 1e-12 {
        return s / 5.0;
    }
    ((s / 5.0) * beta.ln_1p()).exp_m1() / beta
}

/// Choose β so that `median` lands on 2.5 leaves.
///
/// The family is concave, so only medians below 0.5 can be lifted to the
/// midpoint; anything else is a configuration error.
pub fn fit_beta(raw_values: &[f64]) -> Result<f64, ScoreError> {
    if raw_values.is_empty() {
        return Err(ScoreError::InvalidInput("no values to calibrate on".into()));
    }
    let mut v: Vec<f64> = raw_values.to_vec();
    v.sort_by(f64::total_cmp);
    let median = if v.len() % 2 == 1 {
        v[v.len() / 2]
    } else {
        (v[v.len() / 2 - 1] + v[v.len() / 2]) / 2.0
    };
    if !(median > 0.0 && median < 0.5) {
        return Err(ScoreError::Config(format!(
            "median raw value {median} cannot be mapped to 2.5 by a concave curve"
        )));
    }
    let (mut lo, mut hi) = (1e-9f64.ln(), 1e12f64.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if to_leaf_scale(median, mid.exp()) < 2.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Weighted mean of the available subscores.
pub fn ecograde(factors: &FactorScores, weights: &PerFactor) -> Result<f64, ScoreError> {
    let (mut num, mut den) = (0.0, 0.0);
    for (f, v) in factors.present() {
        num += weights.get(f) * v;
        den += weights.get(f);
    }
    if den == 0.0 {
        return Err(ScoreError::NoScore);
    }
    Ok(num / den)
}

/// Integer leaf count for display.
pub fn leaves(overall: f64, rounding: LeafRounding) -> u8 {
    let v = match rounding {
        LeafRounding::HalfUp => (overall + 0.5).floor(),
        LeafRounding::Truncate => overall.floor(),
    };
    v.clamp(0.0, 5.0) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Co2Range {
    pub avg: f64,
    pub low: f64,
    pub high: f64,
}

/// Tonnes CO₂ per year for mean/min/max kWh per m².
pub fn co2_estimate(
    kwh_mean: f64,
    kwh_min: f64,
    kwh_max: f64,
    floor_area: f64,
    factors: &ConversionFactors,
    mix: FuelMix,
) -> Result<Co2Range, ScoreError> {
    if !(floor_area > 0.0) {
        return Err(ScoreError::InvalidInput(format!(
            "floor area {floor_area} must be positive"
        )));
    }
    let f = mix.blended_factor(factors)?;
    let t = |kwh: f64| kwh * floor_area * f / 1000.0;
    Ok(Co2Range {
        avg: t(kwh_mean),
        low: t(kwh_min),
        high: t(kwh_max),
    })
}

/// Everything the scorer needs besides the data itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringConfig {
    pub calibration: ScoreCalibration,
    pub conversion: ConversionFactors,
    pub min_similar: usize,
    pub bedrooms: BedroomLookupTable,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            calibration: ScoreCalibration::default(),
            conversion: ConversionFactors::default(),
            min_similar: DEFAULT_MIN_SIMILAR,
            bedrooms: BedroomLookupTable::shipped(),
        }
    }
}

/// On-disk form of the calibration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub version: u32,
    #[serde(default)]
    pub calibration: ScoreCalibration,
    #[serde(default)]
    pub conversion: ConversionFactors,
    #[serde(default = "default_min_similar")]
    pub min_similar: usize,
    /// Optional path to a bedroom table, relative to the calibration file.
    #[serde(default)]
    pub bedroom_table: Option<String>,
}

fn default_min_similar() -> usize {
    DEFAULT_MIN_SIMILAR
}

pub const CALIBRATION_VERSION: u32 = 1;

impl ScoringConfig {
    pub fn validate(&self) -> Result<(), ScoreError> {
        self.calibration.validate()?;
        self.conversion.validate()?;
        if self.min_similar == 0 {
            return Err(ScoreError::Config("min_similar must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self, ScoreError> {
        let file: CalibrationFile = toml::from_str(text).map_err(|e| ScoreError::Config(e.to_string()))?;
        if file.version != CALIBRATION_VERSION {
            return Err(ScoreError::Config(format!(
                "unsupported calibration version {} (expected {CALIBRATION_VERSION})",
                file.version
            )));
        }
        let bedrooms = match &file.bedroom_table {
            Some(p) => {
                let path = base_dir.map(|d| d.join(p)).unwrap_or_else(|| p.into());
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ScoreError::Config(format!("{}: {e}", path.display())))?;
                BedroomLookupTable::from_toml(&text).map_err(|e| ScoreError::Config(e.to_string()))?
            }
            None => BedroomLookupTable::shipped(),
        };
        let cfg = ScoringConfig {
            calibration: file.calibration,
            conversion: file.conversion,
            min_similar: file.min_similar,
            bedrooms,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ScoreError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScoreError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent())
    }
}

/// Fixed transport points plus timestamped snapshots of mobile options.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransportData {
    pub fixed: Vec<TransportPoint>,
    pub snapshots: Vec<Snapshot>,
}

/// Certificate-derived inputs for one listing.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateEvidence {
    pub metrics: InterpolationResult,
    pub direct: bool,
    pub gas_heated: bool,
    /// kWh/m² of every certificate behind the metrics.
    pub kwh_values: Vec<f64>,
}

impl CertificateEvidence {
    pub fn from_direct(r: &EpcRecord) -> Self {
        Self {
            metrics: InterpolationResult::direct(r),
            direct: true,
            gas_heated: r.uses_gas(),
            kwh_values: vec![r.kwh_per_m2],
        }
    }

    pub fn from_neighbors(records: &[&EpcRecord], widened: bool) -> Result<Self, MatchError> {
        let metrics = interpolate(records, widened)?;
        let gas = records.iter().filter(|r| r.uses_gas()).count();
        Ok(Self {
            metrics,
            direct: false,
            gas_heated: 2 * gas > records.len(),
            kwh_values: records.iter().map(|r| r.kwh_per_m2).collect(),
        })
    }
}

/// Resolve certificate evidence: the listing's own certificate when one
/// exists, otherwise similar neighbors.
pub fn resolve_evidence(
    listing: &Listing,
    index: &EpcIndex,
    config: &ScoringConfig,
) -> Result<CertificateEvidence, MatchError> {
    if let Some(r) = find_direct(listing, index) {
        return Ok(CertificateEvidence::from_direct(r));
    }
    let n = find_neighbors(listing, index, &config.bedrooms, config.min_similar)?;
    CertificateEvidence::from_neighbors(&n.records, n.widened)
}

/// Batch and single-listing scorer.
#[derive(Debug, Clone, Default)]
pub struct Scorer {
    pub config: ScoringConfig,
}

impl Scorer {
    pub fn new(config: ScoringConfig) -> Self {
        Self { config }
    }

    fn leaf(&self, f: Factor, x: f64) -> f64 {
        to_leaf_scale(x, self.config.calibration.leaf_curve_beta.get(f))
    }

    /// Score one listing. `area_override` replaces the certificate floor area
    /// used for CO₂ (the neighbor mean when interpolating).
    pub fn score_with_evidence(
        &self,
        listing: &Listing,
        evidence: Option<&CertificateEvidence>,
        transport: &TransportData,
        area_override: Option<f64>,
    ) -> Result<EcoGradeReport, ScoreError> {
        listing
            .validate()
            .map_err(|e| ScoreError::InvalidInput(e.to_string()))?;
        let calib = &self.config.calibration;
        let mut scores = FactorScores::default();

        let kwh = listing.meter_kwh_per_m2.or(evidence.map(|e| e.metrics.kwh_mean));
        scores.consumption = kwh.map(|k| self.leaf(Factor::Consumption, consumption_factor(k, calib)));

        let features = evidence.map(|e| e.metrics.feature_means.clone()).unwrap_or_default();
        scores.efficiency = efficiency_factor(&features)
            .ok()
            .map(|x| self.leaf(Factor::Efficiency, x));

        scores.supplier = match supplier_factor(listing.tariff.as_ref()) {
            Ok(x) => Some(self.leaf(Factor::Supplier, x)),
            Err(ScoreError::FactorUnavailable) => None,
            Err(e) => return Err(e),
        };

        let point =
            GeoPoint::new(listing.latitude, listing.longitude).map_err(|e| ScoreError::InvalidInput(e.to_string()))?;
        scores.transport = access_summary(point, &transport.fixed, &transport.snapshots)
            .ok()
            .map(|s| self.leaf(Factor::Transport, transport_factor(s.mean_time_hours, calib)));

        let overall = ecograde(&scores, &calib.weights)?;

        let gas = match &listing.tariff {
            Some(t) => t.gas_main_heat,
            None => evidence.is_some_and(|e| e.gas_heated),
        };
        let mix = FuelMix::for_gas_heat(gas);
        let area = area_override.or(evidence.map(|e| e.metrics.area_mean));

        let (provenance, kwh_values) = match (listing.meter_kwh_per_m2, evidence) {
            (Some(m), _) => (Provenance::Meter, vec![m]),
            (None, Some(e)) if e.direct => (Provenance::Direct, e.kwh_values.clone()),
            (None, Some(e)) => (
                Provenance::Interpolated {
                    n_neighbors: e.metrics.n_neighbors,
                    widened: e.metrics.widened,
                },
                e.kwh_values.clone(),
            ),
            (None, None) => (Provenance::NoCertificate, Vec::new()),
        };

        let (co2, co2_sample) = match area {
            Some(a) if !kwh_values.is_empty() => {
                let per_cert: Vec<f64> = kwh_values
                    .iter()
                    .map(|k| co2_estimate(*k, *k, *k, a, &self.config.conversion, mix).map(|r| r.avg))
                    .collect::<Result<_, _>>()?;
                let sample = SampleStats::from_values(&per_cert).expect("nonempty");
                let low = per_cert.iter().copied().fold(f64::INFINITY, f64::min);
                let high = per_cert.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (
                    Some(Co2Range {
                        avg: sample.mu.clamp(low, high),
                        low,
                        high,
                    }),
                    Some(sample),
                )
            }
            _ => (None, None),
        };

        Ok(EcoGradeReport {
            listing_id: listing.id.clone(),
            missing_factors: scores.missing(),
            factor_scores: scores,
            overall,
            leaves: leaves(overall, calib.leaf_rounding),
            co2_avg: co2.map(|c| c.avg),
            co2_low: co2.map(|c| c.low),
            co2_high: co2.map(|c| c.high),
            provenance,
            feature_scores: features,
            features_inferred: evidence.is_some_and(|e| !e.direct),
            co2_sample,
            floor_area: area,
        })
    }

    /// Full pipeline for one listing against an index.
    pub fn score(
        &self,
        listing: &Listing,
        index: &EpcIndex,
        transport: &TransportData,
    ) -> Result<EcoGradeReport, ScoreError> {
        let evidence = resolve_evidence(listing, index, &self.config).ok();
        self.score_with_evidence(listing, evidence.as_ref(), transport, None)
    }

    /// Score every listing. Unscoreable listings produce a diagnostic
    /// instead of a report. Output follows input order.
    pub fn score_all(&self, listings: &[Listing], index: &EpcIndex, transport: &TransportData) -> BatchOutcome {
        let mut out = BatchOutcome::default();
        for l in listings {
            match self.score(l, index, transport) {
                Ok(r) => out.reports.push(r),
                Err(e) => out.diagnostics.push(ScoreDiagnostic {
                    listing_id: l.id.clone(),
                    reason: e.to_string(),
                }),
            }
        }
        out
    }

    /// Overall grade after replacing the attribute scores, other factors held.
    pub fn rescore_features(
        &self,
        report: &EcoGradeReport,
        features: &BTreeMap<EpcAttribute, f64>,
    ) -> Result<f64, ScoreError> {
        let mut scores = report.factor_scores;
        scores.efficiency = efficiency_factor(features)
            .ok()
            .map(|x| self.leaf(Factor::Efficiency, x));
        ecograde(&scores, &self.config.calibration.weights)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDiagnostic {
    pub listing_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchOutcome {
    pub reports: Vec<EcoGradeReport>,
    pub diagnostics: Vec<ScoreDiagnostic>,
}
