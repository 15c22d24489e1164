//! Resolve a listing to its own certificate, or estimate its metrics from
//! similar certificates nearby.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{IngestError, MatchError};
use crate::ingest::{dedupe_by_address, infer_bedrooms, BedroomLookupTable};
use crate::model::{AddressKey, EpcAttribute, EpcRecord, Listing};

pub const DEFAULT_MIN_SIMILAR: usize = 3;

/// Certificates keyed by dwelling, full postcode, and outward code.
///
/// Built once, then shared read-only.
#[derive(Debug, Clone, Default)]
pub struct EpcIndex {
    records: Vec<EpcRecord>,
    by_key: HashMap<AddressKey, usize>,
    by_postcode: BTreeMap<String, Vec<usize>>,
    by_outward: BTreeMap<String, Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct IndexSnapshot {
    version: u32,
    records: Vec<EpcRecord>,
}

impl EpcIndex {
    /// Build from canonical records. Duplicate dwellings are resolved with
    /// [`dedupe_by_address`], so the result is order independent.
    pub fn build(records: Vec<EpcRecord>) -> Self {
        let records = dedupe_by_address(records);
        let mut idx = EpcIndex {
            records,
            ..Default::default()
        };
        for (i, r) in idx.records.iter().enumerate() {
            idx.by_key.insert(r.key(), i);
            idx.by_postcode.entry(r.key().postcode).or_default().push(i);
            idx.by_outward.entry(r.outward()).or_default().push(i);
        }
        idx
    }

    pub fn records(&self) -> &[EpcRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &AddressKey) -> Option<&EpcRecord> {
        self.by_key.get(key).map(|&i| &self.records[i])
    }

    pub fn in_postcode(&self, postcode: &str) -> impl Iterator<Item = &EpcRecord> {
        let pc = crate::model::normalize_postcode(postcode);
        self.by_postcode
            .get(&pc)
            .into_iter()
            .flatten()
            .map(|&i| &self.records[i])
    }

    pub fn in_outward(&self, outward: &str) -> impl Iterator<Item = &EpcRecord> {
        self.by_outward
            .get(&outward.to_ascii_uppercase())
            .into_iter()
            .flatten()
            .map(|&i| &self.records[i])
    }

    /// Write the single-file snapshot. Records are already in key order, so
    /// the bytes depend only on the record set.
    pub fn write_snapshot<W: Write>(&self, w: W) -> serde_json::Result<()> {
        serde_json::to_writer(
            w,
            &IndexSnapshot {
                version: 1,
                records: self.records.clone(),
            },
        )
    }

    pub fn read_snapshot<R: Read>(r: R) -> serde_json::Result<Self> {
        let snap: IndexSnapshot = serde_json::from_reader(r)?;
        Ok(Self::build(snap.records))
    }
}

/// Certificate at the listing's own (address, postcode).
pub fn find_direct<'a>(listing: &Listing, index: &'a EpcIndex) -> Option<&'a EpcRecord> {
    index.get(&listing.key())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbors<'a> {
    pub records: Vec<&'a EpcRecord>,
    pub widened: bool,
}

fn same_bedrooms<'a>(
    candidates: impl Iterator<Item = &'a EpcRecord>,
    own: &AddressKey,
    bedrooms: u8,
    city: &str,
    table: &BedroomLookupTable,
) -> Result<Vec<&'a EpcRecord>, MatchError> {
    let mut out = Vec::new();
    for r in candidates {
        if r.key() == *own {
            continue;
        }
        match infer_bedrooms(r.floor_area, city, table) {
            Ok(b) if b == bedrooms => out.push(r),
            Ok(_) | Err(IngestError::OutOfRange { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// Same-postcode certificates whose inferred bedroom count equals the
/// listing's; widened to the outward code when fewer than `min_similar`.
pub fn find_neighbors<'a>(
    listing: &Listing,
    index: &'a EpcIndex,
    table: &BedroomLookupTable,
    min_similar: usize,
) -> Result<Neighbors<'a>, MatchError> {
    let bedrooms = listing
        .bedrooms
        .ok_or_else(|| MatchError::MissingBedrooms(listing.id.clone()))?;
    let own = listing.key();
    let local = same_bedrooms(index.in_postcode(&own.postcode), &own, bedrooms, &listing.city, table)?;
    if local.len() >= min_similar {
        return Ok(Neighbors {
            records: local,
            widened: false,
        });
    }
    let outward = crate::model::outward_code(&own.postcode);
    let wide = same_bedrooms(index.in_outward(&outward), &own, bedrooms, &listing.city, table)?;
    if wide.is_empty() {
        return Err(MatchError::NoComparableData(listing.id.clone()));
    }
    Ok(Neighbors {
        records: wide,
        widened: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationResult {
    /// Mean band score per attribute, over neighbors reporting it.
    pub feature_means: BTreeMap<EpcAttribute, f64>,
    pub kwh_mean: f64,
    pub kwh_min: f64,
    pub kwh_max: f64,
    pub n_neighbors: usize,
    pub widened: bool,
    pub area_mean: f64,
    pub area_min: f64,
    pub area_max: f64,
}

impl InterpolationResult {
    /// The metrics of a single certificate.
    pub fn direct(r: &EpcRecord) -> Self {
        interpolate(&[r], false).expect("one record")
    }
}

/// Incremental mean: exact when every value is equal.
#[derive(Debug, Clone, Copy, Default)]
struct RunningMean {
    mean: f64,
    n: usize,
}

impl RunningMean {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.mean += (x - self.mean) / self.n as f64;
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let mut m = RunningMean::default();
    values.for_each(|v| m.push(v));
    m.mean
}

/// Average neighbor metrics. Attributes no neighbor reports are left out.
pub fn interpolate(neighbors: &[&EpcRecord], widened: bool) -> Result<InterpolationResult, MatchError> {
    if neighbors.is_empty() {
        return Err(MatchError::EmptyNeighbors);
    }
    let mut means: BTreeMap<EpcAttribute, RunningMean> = BTreeMap::new();
    for r in neighbors {
        for (attr, band) in &r.bands {
            means.entry(*attr).or_default().push(band.score());
        }
    }
    let feature_means = means.into_iter().map(|(a, m)| (a, m.mean)).collect();
    let kwh = neighbors.iter().map(|r| r.kwh_per_m2);
    let area = neighbors.iter().map(|r| r.floor_area);
    Ok(InterpolationResult {
        feature_means,
        kwh_mean: mean_of(kwh.clone()),
        kwh_min: kwh.clone().fold(f64::INFINITY, f64::min),
        kwh_max: kwh.fold(f64::NEG_INFINITY, f64::max),
        n_neighbors: neighbors.len(),
        widened,
        area_mean: mean_of(area.clone()),
        area_min: area.clone().fold(f64::INFINITY, f64::min),
        area_max: area.fold(f64::NEG_INFINITY, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{normalize_address, Bands, EfficiencyBand};

    fn cert(addr: &str, postcode: &str, area: f64, kwh: f64, walls: Option<EfficiencyBand>) -> EpcRecord {
        let mut bands = Bands::new();
        bands.insert(EpcAttribute::Lighting, EfficiencyBand::Good);
        if let Some(w) = walls {
            bands.insert(EpcAttribute::Walls, w);
        }
        EpcRecord {
            address_key: normalize_address(addr),
            postcode: postcode.into(),
            floor_area: area,
            bands,
            kwh_per_m2: kwh,
            lodgement_date: "2021-01-01".parse().unwrap(),
            headline_rating: None,
            main_fuel: None,
        }
    }

    fn listing(addr: &str, postcode: &str, beds: u8) -> Listing {
        Listing {
            id: format!("L-{addr}"),
            address_key: addr.into(),
            postcode: postcode.into(),
            latitude: 51.5,
            longitude: -0.1,
            bedrooms: Some(beds),
            city: "London".into(),
            tariff: None,
            meter_kwh_per_m2: None,
        }
    }

    #[test]
    fn direct_match_distinguishes_flats() {
        let idx = EpcIndex::build(vec![
            cert("Flat 1, 10 Elm Rd", "N1 9GU", 45.0, 100.0, None),
            cert("Flat 2, 10 Elm Rd", "N1 9GU", 46.0, 200.0, None),
        ]);
        let a = find_direct(&listing("flat 1 10 elm rd", "n19gu", 1), &idx).unwrap();
        let b = find_direct(&listing("Flat 2, 10 Elm Rd", "N1 9GU", 1), &idx).unwrap();
        assert_eq!(a.kwh_per_m2, 100.0);
        assert_eq!(b.kwh_per_m2, 200.0);
        assert!(find_direct(&listing("Flat 3, 10 Elm Rd", "N1 9GU", 1), &idx).is_none());
    }

    #[test]
    fn neighbors_same_postcode() {
        // London 1-bed band is [37, 52)
        let recs: Vec<_> = (0..5)
            .map(|i| cert(&format!("{i} Elm Rd"), "N1 9GU", 45.0, 100.0, None))
            .collect();
        let idx = EpcIndex::build(recs);
        let n = find_neighbors(
            &listing("99 Elm Rd", "N1 9GU", 1),
            &idx,
            &BedroomLookupTable::shipped(),
            3,
        )
        .unwrap();
        assert_eq!(n.records.len(), 5);
        assert!(!n.widened);
    }

    #[test]
    fn neighbors_widen_to_outward() {
        let mut recs = vec![cert("1 Elm Rd", "N1 9GU", 45.0, 100.0, None)];
        recs.extend((0..4).map(|i| cert(&format!("{i} Oak Rd"), "N1 7AB", 40.0, 150.0, None)));
        recs.push(cert("5 Oak Rd", "N1 7AB", 90.0, 150.0, None)); // 3-bed, excluded
        recs.push(cert("6 Oak Rd", "N2 7AB", 40.0, 150.0, None)); // other district
        let idx = EpcIndex::build(recs);
        let n = find_neighbors(
            &listing("99 Elm Rd", "N1 9GU", 1),
            &idx,
            &BedroomLookupTable::shipped(),
            3,
        )
        .unwrap();
        assert_eq!(n.records.len(), 5);
        assert!(n.widened);
    }

    #[test]
    fn neighbors_empty_index() {
        let idx = EpcIndex::build(vec![]);
        let err = find_neighbors(&listing("1 A", "N1 9GU", 1), &idx, &BedroomLookupTable::shipped(), 3).unwrap_err();
        assert!(matches!(err, MatchError::NoComparableData(_)));
    }

    #[test]
    fn neighbors_need_bedrooms_and_known_city() {
        let idx = EpcIndex::build(vec![cert("1 Elm Rd", "N1 9GU", 45.0, 100.0, None)]);
        let mut l = listing("2 Elm Rd", "N1 9GU", 1);
        l.bedrooms = None;
        assert!(matches!(
            find_neighbors(&l, &idx, &BedroomLookupTable::shipped(), 3),
            Err(MatchError::MissingBedrooms(_))
        ));
        let mut l = listing("2 Elm Rd", "N1 9GU", 1);
        l.city = "Atlantis".into();
        assert!(matches!(
            find_neighbors(&l, &idx, &BedroomLookupTable::shipped(), 3),
            Err(MatchError::Bedrooms(IngestError::UnknownCity(_)))
        ));
    }

    #[test]
    fn singleton_interpolation_is_direct() {
        let r = cert("1 A", "N1 9GU", 45.0, 123.0, Some(EfficiencyBand::Poor));
        let res = interpolate(&[&r], false).unwrap();
        assert_eq!(res.kwh_min, res.kwh_max);
        assert_eq!(res.kwh_mean, 123.0);
        assert_eq!(res.feature_means[&EpcAttribute::Walls], 0.25);
        assert_eq!(res.feature_means[&EpcAttribute::Lighting], 0.75);
        assert_eq!(res.n_neighbors, 1);
    }

    #[test]
    fn walls_mean_of_two() {
        let a = cert("1 A", "N1 9GU", 45.0, 100.0, Some(EfficiencyBand::VeryGood));
        let b = cert("2 A", "N1 9GU", 45.0, 200.0, Some(EfficiencyBand::Average));
        let res = interpolate(&[&a, &b], false).unwrap();
        assert_eq!(res.feature_means[&EpcAttribute::Walls], 0.75);
    }

    #[test]
    fn four_neighbor_fixture() {
        // walls: VG(1.0), P(0.25), absent, A(0.5) → 1.75 / 3
        // kwh: 120, 180, 150, 250 → mean 175
        let recs = [
            cert("1 A", "N1 9GU", 40.0, 120.0, Some(EfficiencyBand::VeryGood)),
            cert("2 A", "N1 9GU", 44.0, 180.0, Some(EfficiencyBand::Poor)),
            cert("3 A", "N1 9GU", 48.0, 150.0, None),
            cert("4 A", "N1 9GU", 50.0, 250.0, Some(EfficiencyBand::Average)),
        ];
        let refs: Vec<_> = recs.iter().collect();
        let res = interpolate(&refs, true).unwrap();
        assert!((res.feature_means[&EpcAttribute::Walls] - 1.75 / 3.0).abs() < 1e-15);
        assert_eq!(res.feature_means[&EpcAttribute::Lighting], 0.75);
        assert!(!res.feature_means.contains_key(&EpcAttribute::Roof));
        assert_eq!(res.kwh_mean, 175.0);
        assert_eq!((res.kwh_min, res.kwh_max), (120.0, 250.0));
        assert_eq!((res.area_min, res.area_max), (40.0, 50.0));
        assert_eq!(res.area_mean, 45.5);
        assert!(res.widened);
    }

    #[test]
    fn empty_interpolation_is_error() {
        assert!(matches!(interpolate(&[], false), Err(MatchError::EmptyNeighbors)));
    }

    #[test]
    fn snapshot_round_trip_is_deterministic() {
        let recs = vec![
            cert("2 Elm Rd", "N1 9GU", 45.0, 100.0, None),
            cert("1 Elm Rd", "N1 9GU", 46.0, 200.0, None),
        ];
        let mut rev = recs.clone();
        rev.reverse();
        let mut a = Vec::new();
        let mut b = Vec::new();
        EpcIndex::build(recs).write_snapshot(&mut a).unwrap();
        EpcIndex::build(rev).write_snapshot(&mut b).unwrap();
        assert_eq!(a, b);
        let back = EpcIndex::read_snapshot(&a[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.in_outward("N1").count(), 2);
    }
}
