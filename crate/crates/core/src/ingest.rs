//! Certificate ingestion: parse open-data exports, clean obvious entry
//! errors, keep one certificate per dwelling, and turn floor areas into
//! probable bedroom counts.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::IngestError;
use crate::model::{
    normalize_address, normalize_postcode, Bands, EfficiencyBand, EpcAttribute, EpcRecord, RatingLetter,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    Csv,
    JsonLines,
}

impl ExportFormat {
    /// Guess from a file extension (`.csv`, `.jsonl`, `.ndjson`).
    pub fn from_extension(path: &std::path::Path) -> Option<ExportFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(ExportFormat::Csv),
            "jsonl" | "ndjson" => Some(ExportFormat::JsonLines),
            _ => None,
        }
    }
}

/// A row-level problem found while parsing. `row` counts data rows from 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    pub records: Vec<EpcRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

const ADDRESS_COLS: &[&str] = &["address", "address_key"];
const ADDRESS_PART_COLS: &[&str] = &["address1", "address2", "address3"];
const POSTCODE_COLS: &[&str] = &["postcode"];
const AREA_COLS: &[&str] = &["total_floor_area", "floor_area"];
const KWH_COLS: &[&str] = &["energy_consumption_current", "kwh_per_m2"];
const DATE_COLS: &[&str] = &["lodgement_date", "lodgement_datetime"];
const RATING_COLS: &[&str] = &["current_energy_rating", "headline_rating"];
const FUEL_COLS: &[&str] = &["main_fuel"];

fn normalize_header(h: &str) -> String {
    h.trim()
        .chars()
        .map(|c| {
            if c == '-' || c == ' ' {
                '_'
            } else {
                c.to_ascii_lowercase()
            }
        })
        .collect()
}

fn pick<'a>(row: &'a HashMap<String, String>, names: &[&str]) -> Option<&'a str> {
    names
        .iter()
        .filter_map(|n| row.get(*n))
        .map(|v| v.trim())
        .find(|v| !v.is_empty())
}

fn is_not_recorded(v: &str) -> bool {
    matches!(
        v.to_ascii_uppercase().as_str(),
        "N/A" | "NA" | "NODATA!" | "NO DATA" | "INVALID!"
    )
}

/// Build a record from one flattened row. Band problems are reported
/// through `diags` without rejecting the row.
fn record_from_row(row: &HashMap<String, String>, row_no: usize, diags: &mut Vec<Diagnostic>) -> Option<EpcRecord> {
    let mut fail = |reason: String| {
        diags.push(Diagnostic { row: row_no, reason });
        None
    };

    let address = match pick(row, ADDRESS_COLS) {
        Some(a) => a.to_string(),
        None => {
            let parts: Vec<&str> = ADDRESS_PART_COLS
                .iter()
                .filter_map(|c| row.get(*c))
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .collect();
            if parts.is_empty() {
                return fail("missing address".into());
            }
            parts.join(" ")
        }
    };
    let Some(postcode) = pick(row, POSTCODE_COLS) else {
        return fail("missing postcode".into());
    };
    let floor_area = match pick(row, AREA_COLS).map(str::parse::<f64>) {
        Some(Ok(v)) if v.is_finite() && v > 0.0 => v,
        Some(Ok(v)) => return fail(format!("floor area {v} is not positive")),
        Some(Err(_)) => return fail("unparseable floor area".into()),
        None => return fail("missing floor area".into()),
    };
    let kwh = match pick(row, KWH_COLS).map(str::parse::<f64>) {
        Some(Ok(v)) if v.is_finite() && v >= 0.0 => v,
        Some(Ok(v)) => return fail(format!("kWh/m² {v} is negative")),
        Some(Err(_)) => return fail("unparseable kWh/m²".into()),
        None => return fail("missing kWh/m²".into()),
    };
    let date = match pick(row, DATE_COLS) {
        Some(d) => match NaiveDate::parse_from_str(d.get(..10).unwrap_or(d), "%Y-%m-%d") {
            Ok(d) => d,
            Err(_) => return fail(format!("unparseable lodgement date {d:?}")),
        },
        None => return fail("missing lodgement date".into()),
    };

    let headline_rating = match pick(row, RATING_COLS) {
        Some(r) => match r.parse::<RatingLetter>() {
            Ok(r) => Some(r),
            Err(_) => {
                diags.push(Diagnostic {
                    row: row_no,
                    reason: format!("unrecognized rating {r:?}"),
                });
                None
            }
        },
        None => None,
    };

    let mut bands = Bands::new();
    for attr in EpcAttribute::ALL {
        let Some(raw) = pick(row, &[attr.export_column(), attr.key()]) else {
            continue;
        };
        match raw.parse::<EfficiencyBand>() {
            Ok(b) => {
                bands.insert(attr, b);
            }
            Err(_) => {
                let what = if is_not_recorded(raw) {
                    "not recorded"
                } else {
                    "unrecognized"
                };
                diags.push(Diagnostic {
                    row: row_no,
                    reason: format!("{} band {what}: {raw:?}", attr.key()),
                });
            }
        }
    }

    Some(EpcRecord {
        address_key: normalize_address(&address),
        postcode: normalize_postcode(postcode),
        floor_area,
        bands,
        kwh_per_m2: kwh,
        lodgement_date: date,
        headline_rating,
        main_fuel: pick(row, FUEL_COLS).map(str::to_string),
    })
}

fn json_value_to_string(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::Null => None,
        serde_json::Value::String(s) => Some(s.clone()),
        other => Some(other.to_string()),
    }
}

/// Parse a certificate export. Order is preserved; per-row problems become
/// diagnostics and never abort the parse.
pub fn parse_epc_export<R: Read>(source: R, format: ExportFormat) -> Result<ParseOutcome, IngestError> {
    let mut out = ParseOutcome::default();
    match format {
        ExportFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(true)
                .flexible(true)
                .from_reader(source);
            let headers: Vec<String> = rdr.headers()?.iter().map(normalize_header).collect();
            for (i, rec) in rdr.records().enumerate() {
                let row_no = i + 1;
                let rec = match rec {
                    Ok(r) => r,
                    Err(e) if e.is_io_error() => return Err(e.into()),
                    Err(e) => {
                        out.diagnostics.push(Diagnostic {
                            row: row_no,
                            reason: format!("malformed row: {e}"),
                        });
                        continue;
                    }
                };
                let row: HashMap<String, String> =
                    headers.iter().cloned().zip(rec.iter().map(str::to_string)).collect();
                if let Some(r) = record_from_row(&row, row_no, &mut out.diagnostics) {
                    out.records.push(r);
                }
            }
        }
        ExportFormat::JsonLines => {
            let reader = BufReader::new(source);
            let mut row_no = 0;
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                row_no += 1;
                let value: serde_json::Value = match serde_json::from_str(&line) {
                    Ok(v) => v,
                    Err(e) => {
                        out.diagnostics.push(Diagnostic {
                            row: row_no,
                            reason: format!("malformed json: {e}"),
                        });
                        continue;
                    }
                };
                let serde_json::Value::Object(obj) = value else {
                    out.diagnostics.push(Diagnostic {
                        row: row_no,
                        reason: "row is not a json object".into(),
                    });
                    continue;
                };
                let mut row = HashMap::new();
                for (k, v) in &obj {
                    if k == "bands" {
                        if let serde_json::Value::Object(bands) = v {
                            for (bk, bv) in bands {
                                if let Some(s) = json_value_to_string(bv) {
                                    row.insert(normalize_header(bk), s);
                                }
                            }
                        }
                    } else if let Some(s) = json_value_to_string(v) {
                        row.insert(normalize_header(k), s);
                    }
                }
                if let Some(r) = record_from_row(&row, row_no, &mut out.diagnostics) {
                    out.records.push(r);
                }
            }
        }
    }
    Ok(out)
}

/// Thresholds for the obvious-entry-error filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningRules {
    pub max_plausible_area: f64,
    pub min_plausible_area: f64,
    pub good_rating_kwh_cap: f64,
    pub good_ratings: Vec<RatingLetter>,
}

impl Default for CleaningRules {
    fn default() -> Self {
        Self {
            max_plausible_area: 500.0,
            min_plausible_area: 10.0,
            good_rating_kwh_cap: 400.0,
            good_ratings: vec![RatingLetter::A, RatingLetter::B],
        }
    }
}

impl CleaningRules {
    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.min_plausible_area < self.max_plausible_area) {
            return Err(IngestError::InvalidRules(format!(
                "min_plausible_area {} must be below max_plausible_area {}",
                self.min_plausible_area, self.max_plausible_area
            )));
        }
        if !(self.good_rating_kwh_cap > 0.0) {
            return Err(IngestError::InvalidRules("good_rating_kwh_cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    ImplausibleArea,
    RatingKwhConflict,
    NoEfficiencyBands,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::ImplausibleArea => "implausible_area",
            RejectReason::RatingKwhConflict => "rating_kwh_conflict",
            RejectReason::NoEfficiencyBands => "no_efficiency_bands",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CleanOutcome {
    pub kept: Vec<EpcRecord>,
    pub rejected: Vec<(EpcRecord, RejectReason)>,
}

fn reject_reason(r: &EpcRecord, rules: &CleaningRules) -> Option<RejectReason> {
    if r.floor_area < rules.min_plausible_area || r.floor_area > rules.max_plausible_area {
        return Some(RejectReason::ImplausibleArea);
    }
    if r.headline_rating.is_some_and(|l| rules.good_ratings.contains(&l)) && r.kwh_per_m2 > rules.good_rating_kwh_cap {
        return Some(RejectReason::RatingKwhConflict);
    }
    if r.bands.is_empty() {
        return Some(RejectReason::NoEfficiencyBands);
    }
    None
}

/// Partition records into kept and rejected. Input order is preserved on
/// both sides.
pub fn clean_records(records: Vec<EpcRecord>, rules: &CleaningRules) -> CleanOutcome {
    let mut out = CleanOutcome::default();
    for r in records {
        match reject_reason(&r, rules) {
            Some(reason) => out.rejected.push((r, reason)),
            None => out.kept.push(r),
        }
    }
    out
}

/// Missing ratings rank as best so that any recorded rating wins a tie.
fn worseness(r: &EpcRecord) -> u8 {
    r.headline_rating.map(|l| l as u8 + 1).unwrap_or(0)
}

/// Keep one certificate per (address, postcode): latest lodgement date, then
/// worst headline rating, then smallest fingerprint. Output is sorted by key,
/// so it does not depend on input order.
pub fn dedupe_by_address(records: Vec<EpcRecord>) -> Vec<EpcRecord> {
    let mut best: BTreeMap<crate::model::AddressKey, (EpcRecord, String)> = BTreeMap::new();
    for r in records {
        let fp = r.fingerprint();
        let key = r.key();
        match best.get(&key) {
            Some((cur, cur_fp)) => {
                let better = (r.lodgement_date, worseness(&r)) > (cur.lodgement_date, worseness(cur))
                    || ((r.lodgement_date, worseness(&r)) == (cur.lodgement_date, worseness(cur)) && fp < *cur_fp);
                if better {
                    best.insert(key, (r, fp));
                }
            }
            None => {
                best.insert(key, (r, fp));
            }
        }
    }
    best.into_values().map(|(r, _)| r).collect()
}

/// One floor-area band: `[area_low, area_high)` maps to `bedrooms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BedroomRow {
    pub area_low: f64,
    pub area_high: f64,
    pub bedrooms: u8,
}

/// Per-city floor area → bedroom count table. City names match
/// case-insensitively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BedroomLookupTable {
    cities: BTreeMap<String, Vec<BedroomRow>>,
}

#[derive(Deserialize)]
struct TableFile {
    city: Vec<CityRows>,
}

#[derive(Deserialize)]
struct CityRows {
    name: String,
    rows: Vec<(f64, f64, u8)>,
}

const DEFAULT_TABLE: &str = include_str!("../config/bedrooms.toml");

impl BedroomLookupTable {
    pub fn new(cities: impl IntoIterator<Item = (String, Vec<BedroomRow>)>) -> Result<Self, IngestError> {
        let mut map = BTreeMap::new();
        for (city, rows) in cities {
            validate_rows(&city, &rows)?;
            map.insert(city.to_lowercase(), rows);
        }
        Ok(Self { cities: map })
    }

    /// Parse the TOML form (`[[city]] name = .. rows = [[low, high, beds], ..]`).
    pub fn from_toml(text: &str) -> Result<Self, IngestError> {
        let file: TableFile = toml::from_str(text).map_err(|e| IngestError::InvalidTable(e.to_string()))?;
        Self::new(file.city.into_iter().map(|c| {
            let rows = c
                .rows
                .into_iter()
                .map(|(area_low, area_high, bedrooms)| BedroomRow {
                    area_low,
                    area_high,
                    bedrooms,
                })
                .collect();
            (c.name, rows)
        }))
    }

    /// The shipped illustrative table for the ten validation cities.
    pub fn shipped() -> Self {
        Self::from_toml(DEFAULT_TABLE).expect("shipped bedroom table is valid")
    }

    pub fn rows(&self, city: &str) -> Option<&[BedroomRow]> {
        self.cities.get(&city.to_lowercase()).map(Vec::as_slice)
    }

    pub fn cities(&self) -> impl Iterator<Item = &str> {
        self.cities.keys().map(String::as_str)
    }
}

fn validate_rows(city: &str, rows: &[BedroomRow]) -> Result<(), IngestError> {
    if rows.is_empty() {
        return Err(IngestError::InvalidTable(format!("{city}: no rows")));
    }
    for r in rows {
        if !(r.area_low < r.area_high) || r.bedrooms > 5 {
            return Err(IngestError::InvalidTable(format!("{city}: bad row {r:?}")));
        }
    }
    for w in rows.windows(2) {
        if w[0].area_high != w[1].area_low {
            return Err(IngestError::InvalidTable(format!(
                "{city}: rows not contiguous at {}",
                w[0].area_high
            )));
        }
        if w[0].bedrooms > w[1].bedrooms {
            return Err(IngestError::InvalidTable(format!(
                "{city}: bedrooms decrease at {}",
                w[1].area_low
            )));
        }
    }
    Ok(())
}

/// Bedrooms of the row containing `floor_area` (low inclusive, high exclusive).
pub fn infer_bedrooms(floor_area: f64, city: &str, table: &BedroomLookupTable) -> Result<u8, IngestError> {
    let rows = table
        .rows(city)
        .ok_or_else(|| IngestError::UnknownCity(city.to_string()))?;
    rows.iter()
        .find(|r| floor_area >= r.area_low && floor_area < r.area_high)
        .map(|r| r.bedrooms)
        .ok_or(IngestError::OutOfRange {
            city: city.to_string(),
            area: floor_area,
        })
}

/// Write canonical records, one JSON object per line.
pub fn write_records_jsonl<W: Write>(mut w: W, records: &[EpcRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Write the rejection report as CSV (`fingerprint,reason`).
pub fn write_rejections_csv<W: Write>(w: W, rejected: &[(EpcRecord, RejectReason)]) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["fingerprint", "reason"])?;
    for (r, reason) in rejected {
        wtr.write_record([r.fingerprint().as_str(), reason.as_str()])?;
    }
    wtr.flush()?;
    Ok(())
}
