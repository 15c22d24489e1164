//! Great-circle distances and green-transport access times.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::GeoError;

/// Mean Earth radius in km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Average walking speed in km/h.
pub const WALKING_SPEED_KMH: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    /// Latitude, degrees.
    pub phi: f64,
    /// Longitude, degrees.
    pub lambda: f64,
}

impl GeoPoint {
    pub fn new(phi: f64, lambda: f64) -> Result<Self, GeoError> {
        if (-90.0..=90.0).contains(&phi) && (-180.0..=180.0).contains(&lambda) {
            Ok(Self { phi, lambda })
        } else {
            Err(GeoError::InvalidPoint { phi, lambda })
        }
    }
}

/// Haversine great-circle distance in km on a sphere of radius 6371 km.
pub fn haversine_km(a: GeoPoint, s: GeoPoint) -> f64 {
    let (a_phi, s_phi) = (a.phi.to_radians(), s.phi.to_radians());
    let d_phi = s_phi - a_phi;
    let d_lambda = (s.lambda - a.lambda).to_radians();
    let h = (d_phi / 2.0).sin().powi(2) + a_phi.cos() * s_phi.cos() * (d_lambda / 2.0).sin().powi(2);
    // rounding can push h a hair above 1 for antipodes
    2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMode {
    BikeShare,
    EScooter,
    MetroStation,
    BusStop,
    CarShare,
}

impl TransportMode {
    pub const ALL: [TransportMode; 5] = [
        TransportMode::BikeShare,
        TransportMode::EScooter,
        TransportMode::MetroStation,
        TransportMode::BusStop,
        TransportMode::CarShare,
    ];

    /// Free-floating modes whose positions change between observations.
    pub fn is_mobile(self) -> bool {
        matches!(self, TransportMode::EScooter | TransportMode::CarShare)
    }
}

impl fmt::Display for TransportMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TransportMode::BikeShare => "bike_share",
            TransportMode::EScooter => "e_scooter",
            TransportMode::MetroStation => "metro_station",
            TransportMode::BusStop => "bus_stop",
            TransportMode::CarShare => "car_share",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPoint {
    pub location: GeoPoint,
    pub mode: TransportMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_at: Option<DateTime<Utc>>,
}

impl TransportPoint {
    pub fn validate(&self) -> Result<(), GeoError> {
        GeoPoint::new(self.location.phi, self.location.lambda)?;
        if self.mode.is_mobile() && self.observed_at.is_none() {
            return Err(GeoError::MissingObservation(self.mode));
        }
        Ok(())
    }
}

/// Positions of mobile options captured at one moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub captured_at: DateTime<Utc>,
    pub points: Vec<TransportPoint>,
}

fn nearest_in<'a>(
    from: GeoPoint,
    points: impl IntoIterator<Item = &'a TransportPoint>,
    mode: TransportMode,
) -> Option<f64> {
    points
        .into_iter()
        .filter(|p| p.mode == mode)
        .map(|p| haversine_km(from, p.location))
        .min_by(f64::total_cmp)
}

/// Nearest `mode` option over all snapshots, in km.
pub fn nearest_mobile(from: GeoPoint, snapshots: &[Snapshot], mode: TransportMode) -> Result<f64, GeoError> {
    snapshots
        .iter()
        .filter_map(|s| nearest_in(from, &s.points, mode))
        .min_by(f64::total_cmp)
        .ok_or(GeoError::NoOption(mode))
}

/// Hours to walk `distance_km` at 5 km/h.
pub fn walking_time_hours(distance_km: f64) -> Result<f64, GeoError> {
    if distance_km < 0.0 || distance_km.is_nan() {
        return Err(GeoError::NegativeDistance(distance_km));
    }
    Ok(distance_km / WALKING_SPEED_KMH)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessSummary {
    pub nearest_km: BTreeMap<TransportMode, f64>,
    pub time_hours: BTreeMap<TransportMode, f64>,
    pub mean_time_hours: f64,
    /// Modes with no option anywhere in the data.
    pub missing_modes: Vec<TransportMode>,
}

/// Per-mode nearest option across fixed points and mobile snapshots, turned
/// into walking time and averaged (unweighted) over the modes present.
pub fn access_summary(
    from: GeoPoint,
    fixed: &[TransportPoint],
    snapshots: &[Snapshot],
) -> Result<AccessSummary, GeoError> {
    let mut nearest_km = BTreeMap::new();
    let mut missing_modes = Vec::new();
    for mode in TransportMode::ALL {
        let fixed_d = nearest_in(from, fixed, mode);
        let mobile_d = nearest_mobile(from, snapshots, mode).ok();
        match (fixed_d, mobile_d) {
            (Some(a), Some(b)) => {
                nearest_km.insert(mode, a.min(b));
            }
            (Some(d), None) | (None, Some(d)) => {
                nearest_km.insert(mode, d);
            }
            (None, None) => missing_modes.push(mode),
        }
    }
    if nearest_km.is_empty() {
        return Err(GeoError::NoTransportData);
    }
    let time_hours: BTreeMap<_, _> = nearest_km
        .iter()
        .map(|(m, d)| Ok((*m, walking_time_hours(*d)?)))
        .collect::<Result<_, GeoError>>()?;
    let mean_time_hours = time_hours.values().sum::<f64>() / time_hours.len() as f64;
    Ok(AccessSummary {
        nearest_km,
        time_hours,
        mean_time_hours,
        missing_modes,
    })
}

/// Read transport points from JSON-lines. Blank lines are skipped.
pub fn read_points_jsonl<R: Read>(source: R) -> Result<Vec<TransportPoint>, crate::Error> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: TransportPoint =
            serde_json::from_str(&line).map_err(|e| crate::Error::Runtime(format!("transport line {}: {e}", i + 1)))?;
        p.validate()
            .map_err(|e| crate::Error::Runtime(format!("transport line {}: {e}", i + 1)))?;
        out.push(p);
    }
    Ok(out)
}

/// Capture time encoded in a snapshot file name: `<label>_<YYYY-MM-DDTHH-MM-SSZ>.jsonl`.
pub fn snapshot_time_from_name(name: &str) -> Option<DateTime<Utc>> {
    let stem = name.strip_suffix(".jsonl")?;
    let stamp = stem.rsplit('_').next()?;
    NaiveDateTime::parse_from_str(stamp, "%Y-%m-%dT%H-%M-%SZ")
        .ok()
        .map(|n| n.and_utc())
}

/// File name for a snapshot captured at `at`.
pub fn snapshot_file_name(label: &str, at: DateTime<Utc>) -> String {
    format!("{label}_{}.jsonl", at.format("%Y-%m-%dT%H-%M-%SZ"))
}

/// Load every `*.jsonl` snapshot in `dir`, ordered by capture time.
pub fn load_snapshot_dir(dir: &Path) -> Result<Vec<Snapshot>, crate::Error> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Ok(out);
    }
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(captured_at) = snapshot_time_from_name(name) else {
            continue;
        };
        let file = std::fs::File::open(&path).map_err(|source| crate::Error::Read {
            path: path.clone(),
            source,
        })?;
        out.push(Snapshot {
            captured_at,
            points: read_points_jsonl(file)?,
        });
    }
    out.sort_by_key(|s| s.captured_at);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(phi: f64, lambda: f64) -> GeoPoint {
        GeoPoint::new(phi, lambda).unwrap()
    }

    /// Point `km` north of `from` along its meridian.
    fn north_of(from: GeoPoint, km: f64) -> GeoPoint {
        pt(from.phi + (km / EARTH_RADIUS_KM).to_degrees(), from.lambda)
    }

    fn tp(at: GeoPoint, mode: TransportMode) -> TransportPoint {
        TransportPoint {
            location: at,
            mode,
            observed_at: mode.is_mobile().then(|| "2024-05-01T08:00:00Z".parse().unwrap()),
        }
    }

    #[test]
    fn identity_and_antipodes() {
        let a = pt(51.5, -0.12);
        assert_eq!(haversine_km(a, a), 0.0);
        let d = haversine_km(pt(90.0, 0.0), pt(-90.0, 0.0));
        assert!((d - std::f64::consts::PI * EARTH_RADIUS_KM).abs() < 1e-9 * d);
    }

    #[test]
    fn london_paris() {
        let d = haversine_km(pt(51.5074, -0.1278), pt(48.8566, 2.3522));
        assert!((d - 343.5).abs() < 343.5 * 0.005, "{d}");
    }

    #[test]
    fn invalid_point() {
        assert!(GeoPoint::new(90.5, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -181.0).is_err());
    }

    #[test]
    fn mobile_nearest_over_snapshots() {
        let home = pt(51.5, -0.1);
        let at = |km: f64| Snapshot {
            captured_at: Utc::now(),
            points: vec![tp(north_of(home, km), TransportMode::EScooter)],
        };
        let d = nearest_mobile(home, &[at(1.0)], TransportMode::EScooter).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
        let d = nearest_mobile(home, &[at(0.8), at(0.3), at(0.6)], TransportMode::EScooter).unwrap();
        assert!((d - 0.3).abs() < 1e-9);
        assert_eq!(
            nearest_mobile(home, &[], TransportMode::EScooter),
            Err(GeoError::NoOption(TransportMode::EScooter))
        );
    }

    #[test]
    fn walking_times() {
        assert_eq!(walking_time_hours(5.0).unwrap(), 1.0);
        assert_eq!(walking_time_hours(0.0).unwrap(), 0.0);
        assert_eq!(walking_time_hours(2.5).unwrap(), 0.5);
        assert!(walking_time_hours(-1.0).is_err());
    }

    #[test]
    fn access_summary_means() {
        let home = pt(53.48, -2.24);
        // 2.5 km → 0.5 h, 0.5 km → 0.1 h
        let fixed = vec![
            tp(north_of(home, 2.5), TransportMode::MetroStation),
            tp(north_of(home, 0.5), TransportMode::BusStop),
            tp(north_of(home, 4.0), TransportMode::BusStop),
        ];
        let s = access_summary(home, &fixed, &[]).unwrap();
        assert!((s.mean_time_hours - 0.3).abs() < 1e-9);
        assert_eq!(s.time_hours.len(), 2);
        assert_eq!(s.missing_modes.len(), 3);

        let single = access_summary(home, &fixed[1..2], &[]).unwrap();
        assert!((single.mean_time_hours - 0.1).abs() < 1e-9);

        assert_eq!(access_summary(home, &[], &[]), Err(GeoError::NoTransportData));
    }

    #[test]
    fn three_mode_fixture() {
        // bike 1.0 km, metro 1.5 km (fixed) + scooter best-of {2.0, 0.5} km
        let home = pt(52.48, -1.89);
        let fixed = vec![
            tp(north_of(home, 1.0), TransportMode::BikeShare),
            tp(north_of(home, 1.5), TransportMode::MetroStation),
        ];
        let snaps = vec![
            Snapshot {
                captured_at: Utc::now(),
                points: vec![tp(north_of(home, 2.0), TransportMode::EScooter)],
            },
            Snapshot {
                captured_at: Utc::now(),
                points: vec![tp(north_of(home, 0.5), TransportMode::EScooter)],
            },
        ];
        let s = access_summary(home, &fixed, &snaps).unwrap();
        // (0.2 + 0.3 + 0.1) / 3
        assert!((s.mean_time_hours - 0.2).abs() < 1e-9);
    }

    #[test]
    fn snapshot_names_round_trip() {
        let at: DateTime<Utc> = "2024-05-01T17:30:00Z".parse().unwrap();
        let name = snapshot_file_name("scooters", at);
        assert_eq!(name, "scooters_2024-05-01T17-30-00Z.jsonl");
        assert_eq!(snapshot_time_from_name(&name), Some(at));
        assert_eq!(snapshot_time_from_name("notes.txt"), None);
    }

    #[test]
    fn mobile_point_needs_timestamp() {
        let mut p = tp(pt(0.0, 0.0), TransportMode::EScooter);
        p.observed_at = None;
        assert!(p.validate().is_err());
        assert!(tp(pt(0.0, 0.0), TransportMode::BusStop).validate().is_ok());
    }
}
