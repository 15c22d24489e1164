//! File-backed store and the immutable scored snapshot served by the API.
//!
//! A store directory holds one JSON-lines file per entity type:
//!
//! ```text
//! listings.jsonl  epc.jsonl  bookings.jsonl  suppliers.jsonl  clients.jsonl
//! transport/fixed.jsonl  transport/snapshots/<label>_<YYYY-MM-DDTHH-MM-SSZ>.jsonl
//! ```
//!
//! Missing files read as empty.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compare::{build_baselines, BaselineDiagnostic, BaselineSample};
use crate::error::Error;
use crate::geo::{load_snapshot_dir, read_points_jsonl, snapshot_file_name};
use crate::ingest::{infer_bedrooms, write_records_jsonl};
use crate::matching::EpcIndex;
use crate::model::{CityBaseline, EcoGradeReport, EpcRecord, Listing};
use crate::score::{ScoreDiagnostic, Scorer, TransportData};

pub const LISTINGS_FILE: &str = "listings.jsonl";
pub const EPC_FILE: &str = "epc.jsonl";
pub const BOOKINGS_FILE: &str = "bookings.jsonl";
pub const SUPPLIERS_FILE: &str = "suppliers.jsonl";
pub const CLIENTS_FILE: &str = "clients.jsonl";
pub const FIXED_TRANSPORT_FILE: &str = "transport/fixed.jsonl";
pub const SNAPSHOT_DIR: &str = "transport/snapshots";

/// Nights a corporate client booked at a listing in one calendar month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booking {
    pub corporate_client_id: String,
    pub listing_id: String,
    /// `YYYY-MM`.
    pub month: String,
    pub nights: u32,
}

impl Booking {
    /// First day of the booked month.
    pub fn month_start(&self) -> Option<NaiveDate> {
        parse_month(&self.month)
    }
}

/// Parse `YYYY-MM` to the first day of that month.
pub fn parse_month(s: &str) -> Option<NaiveDate> {
    if s.len() != 7 {
        return None;
    }
    NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d").ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Supplier {
    pub id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub listing_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorporateClient {
    pub id: String,
    #[serde(default)]
    pub name: String,
}

/// Everything the scorer and the API read.
#[derive(Debug, Clone, Default)]
pub struct Store {
    pub listings: Vec<Listing>,
    pub index: EpcIndex,
    pub transport: TransportData,
    pub bookings: Vec<Booking>,
    pub suppliers: Vec<Supplier>,
    pub clients: Vec<CorporateClient>,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Error> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v =
            serde_json::from_str(&line).map_err(|e| Error::Runtime(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

impl Store {
    pub fn load(dir: &Path) -> Result<Store, Error> {
        if !dir.is_dir() {
            return Err(Error::Runtime(format!(
                "store directory {} does not exist",
                dir.display()
            )));
        }
        let fixed_path = dir.join(FIXED_TRANSPORT_FILE);
        let fixed = if fixed_path.exists() {
            let f = File::open(&fixed_path).map_err(|source| Error::Read {
                path: fixed_path.clone(),
                source,
            })?;
            read_points_jsonl(f)?
        } else {
            Vec::new()
        };
        let store = Store {
            listings: read_jsonl(&dir.join(LISTINGS_FILE))?,
            index: EpcIndex::build(read_jsonl::<EpcRecord>(&dir.join(EPC_FILE))?),
            transport: TransportData {
                fixed,
                snapshots: load_snapshot_dir(&dir.join(SNAPSHOT_DIR))?,
            },
            bookings: read_jsonl(&dir.join(BOOKINGS_FILE))?,
            suppliers: read_jsonl(&dir.join(SUPPLIERS_FILE))?,
            clients: read_jsonl(&dir.join(CLIENTS_FILE))?,
        };
        store.check()?;
        Ok(store)
    }

    /// Referential and value checks across entity files.
    pub fn check(&self) -> Result<(), Error> {
        let mut ids = BTreeSet::new();
        for l in &self.listings {
            l.validate()
                .map_err(|e| Error::Runtime(format!("listing {}: {e}", l.id)))?;
            if !ids.insert(l.id.as_str()) {
                return Err(Error::Runtime(format!("duplicate listing id {}", l.id)));
            }
        }
        let clients: BTreeSet<_> = self.clients.iter().map(|c| c.id.as_str()).collect();
        for b in &self.bookings {
            if b.month_start().is_none() {
                return Err(Error::Runtime(format!("booking month {:?} is not YYYY-MM", b.month)));
            }
            if b.nights == 0 {
                return Err(Error::Runtime(format!("booking for {} has zero nights", b.listing_id)));
            }
            if !ids.contains(b.listing_id.as_str()) {
                return Err(Error::Runtime(format!(
                    "booking references unknown listing {}",
                    b.listing_id
                )));
            }
            if !clients.contains(b.corporate_client_id.as_str()) {
                return Err(Error::Runtime(format!(
                    "booking references unknown client {}",
                    b.corporate_client_id
                )));
            }
        }
        for s in &self.suppliers {
            if let Some(bad) = s.listing_ids.iter().find(|id| !ids.contains(id.as_str())) {
                return Err(Error::Runtime(format!("supplier {} lists unknown listing {bad}", s.id)));
            }
        }
        Ok(())
    }

    /// Write every entity file under `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), Error> {
        fs::create_dir_all(dir)?;
        write_jsonl(&dir.join(LISTINGS_FILE), &self.listings)?;
        let mut w = BufWriter::new(File::create(dir.join(EPC_FILE))?);
        write_records_jsonl(&mut w, self.index.records())?;
        w.flush()?;
        write_jsonl(&dir.join(BOOKINGS_FILE), &self.bookings)?;
        write_jsonl(&dir.join(SUPPLIERS_FILE), &self.suppliers)?;
        write_jsonl(&dir.join(CLIENTS_FILE), &self.clients)?;
        write_jsonl(&dir.join(FIXED_TRANSPORT_FILE), &self.transport.fixed)?;
        let snap_dir = dir.join(SNAPSHOT_DIR);
        fs::create_dir_all(&snap_dir)?;
        for (i, s) in self.transport.snapshots.iter().enumerate() {
            write_jsonl(
                &snap_dir.join(snapshot_file_name(&format!("mobile{i:03}"), s.captured_at)),
                &s.points,
            )?;
        }
        Ok(())
    }

    pub fn listing(&self, id: &str) -> Option<&Listing> {
        self.listings.iter().find(|l| l.id == id)
    }
}

/// Paths that make up a store, for manifest fingerprints. Existing files only.
pub fn store_files(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let mut out: Vec<PathBuf> = [
        LISTINGS_FILE,
        EPC_FILE,
        BOOKINGS_FILE,
        SUPPLIERS_FILE,
        CLIENTS_FILE,
        FIXED_TRANSPORT_FILE,
    ]
    .iter()
    .map(|f| dir.join(f))
    .filter(|p| p.exists())
    .collect();
    let snap_dir = dir.join(SNAPSHOT_DIR);
    if snap_dir.is_dir() {
        let mut snaps: Vec<PathBuf> = fs::read_dir(&snap_dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        snaps.sort();
        out.extend(snaps);
    }
    Ok(out)
}

/// Bed type used for baselines: the listing's own count, else inferred from
/// the floor area behind its report.
pub fn bed_type(listing: &Listing, report: &EcoGradeReport, scorer: &Scorer) -> Option<u8> {
    listing
        .bedrooms
        .or_else(|| infer_bedrooms(report.floor_area?, &listing.city, &scorer.config.bedrooms).ok())
}

/// Store plus batch-scored reports and baselines. Immutable once built.
#[derive(Debug, Clone)]
pub struct ScoredSnapshot {
    pub store: Store,
    /// Keyed by listing id.
    pub reports: BTreeMap<String, EcoGradeReport>,
    pub diagnostics: Vec<ScoreDiagnostic>,
    pub baselines: Vec<CityBaseline>,
    pub baseline_diagnostics: Vec<BaselineDiagnostic>,
    /// Bed type per scored listing id, as used for baselines.
    pub bed_types: BTreeMap<String, u8>,
    /// SHA-256 over reports and baselines in canonical order.
    pub fingerprint: String,
}

impl ScoredSnapshot {
    pub fn build(store: Store, scorer: &Scorer) -> ScoredSnapshot {
        let batch = scorer.score_all(&store.listings, &store.index, &store.transport);
        let reports: BTreeMap<String, EcoGradeReport> =
            batch.reports.into_iter().map(|r| (r.listing_id.clone(), r)).collect();
        let mut bed_types = BTreeMap::new();
        for l in &store.listings {
            if let Some(b) = reports.get(&l.id).and_then(|r| bed_type(l, r, scorer)) {
                bed_types.insert(l.id.clone(), b);
            }
        }
        let samples = store.listings.iter().filter_map(|l| {
            Some(BaselineSample {
                city: &l.city,
                bed_type: *bed_types.get(&l.id)?,
                co2_avg: reports.get(&l.id)?.co2_avg?,
            })
        });
        let baselines = build_baselines(samples);
        let fingerprint = fingerprint(reports.values(), &baselines.baselines);
        ScoredSnapshot {
            store,
            reports,
            diagnostics: batch.diagnostics,
            baselines: baselines.baselines,
            baseline_diagnostics: baselines.diagnostics,
            bed_types,
            fingerprint,
        }
    }

    pub fn baseline(&self, city: &str, bed_type: u8) -> Option<&CityBaseline> {
        self.baselines.iter().find(|b| b.city == city && b.bed_type == bed_type)
    }
}

/// Hex SHA-256 over the JSON lines of `reports` followed by `baselines`.
pub fn fingerprint<'a>(reports: impl IntoIterator<Item = &'a EcoGradeReport>, baselines: &[CityBaseline]) -> String {
    let mut h = Sha256::new();
    for r in reports {
        h.update(serde_json::to_vec(r).expect("reports serialize"));
        h.update(b"\n");
    }
    for b in baselines {
        h.update(serde_json::to_vec(b).expect("baselines serialize"));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Hex SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String, Error> {
    let bytes = fs::read(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
