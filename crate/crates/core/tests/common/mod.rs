#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::NaiveDate;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use ecograde::ingest::BedroomLookupTable;
use ecograde::model::{
    AddressKey, Bands, EcoGradeReport, EfficiencyBand, EpcAttribute, EpcRecord, FactorScores, Listing, Provenance,
};
use ecograde::score::Scorer;
use ecograde::store::{ScoredSnapshot, Store};
use ecograde::validate::{synthetic_store, CorpusParams, ValidationParams};

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// Two synthetic cities, `n` addresses each.
pub fn synthetic(n: usize) -> Store {
    let mut p = ValidationParams::for_cities(&["London", "Cardiff"], 21).unwrap();
    for c in &mut p.cities {
        c.n_addresses = n;
    }
    synthetic_store(&p, &CorpusParams::default(), &BedroomLookupTable::shipped()).unwrap()
}

pub fn scored(store: Store) -> ScoredSnapshot {
    ScoredSnapshot::build(store, &Scorer::default())
}

pub fn listing(id: &str, city: &str, beds: Option<u8>) -> Listing {
    Listing {
        id: id.into(),
        address_key: format!("{id} Test Street"),
        postcode: "E1 6AN".into(),
        latitude: 51.5,
        longitude: -0.1,
        bedrooms: beds,
        city: city.into(),
        tariff: None,
        meter_kwh_per_m2: None,
    }
}

/// Report with every factor equal to `overall`.
pub fn flat_report(id: &str, overall: f64, co2: Option<f64>) -> EcoGradeReport {
    EcoGradeReport {
        listing_id: id.into(),
        factor_scores: FactorScores {
            consumption: Some(overall),
            efficiency: Some(overall),
            supplier: Some(overall),
            transport: Some(overall),
        },
        overall,
        leaves: overall.round() as u8,
        co2_avg: co2,
        co2_low: co2,
        co2_high: co2,
        provenance: Provenance::Direct,
        missing_factors: Vec::new(),
        feature_scores: BTreeMap::new(),
        features_inferred: false,
        co2_sample: None,
        floor_area: Some(50.0),
    }
}

/// Snapshot with hand-written reports, bypassing the scorer.
pub fn manual_snapshot(store: Store, reports: Vec<EcoGradeReport>) -> ScoredSnapshot {
    ScoredSnapshot {
        store,
        reports: reports.into_iter().map(|r| (r.listing_id.clone(), r)).collect(),
        diagnostics: Vec::new(),
        baselines: Vec::new(),
        baseline_diagnostics: Vec::new(),
        bed_types: BTreeMap::new(),
        fingerprint: "0".repeat(64),
    }
}

pub fn certificate(
    address: &str,
    postcode: &str,
    area: f64,
    kwh: f64,
    bands: &[(EpcAttribute, EfficiencyBand)],
) -> EpcRecord {
    let key = AddressKey::new(address, postcode);
    EpcRecord {
        address_key: key.address,
        postcode: key.postcode,
        floor_area: area,
        bands: bands.iter().copied().collect::<Bands>(),
        kwh_per_m2: kwh,
        lodgement_date: NaiveDate::from_ymd_opt(2021, 6, 1).unwrap(),
        headline_rating: None,
        main_fuel: Some("electricity".into()),
    }
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: String,
    pub body: Value,
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    let res = app
        .clone()
        .oneshot(Request::builder().uri(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = res.status();
    let content_type = res
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let body = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    Reply {
        status,
        content_type,
        body,
    }
}

pub fn openapi() -> Value {
    serde_json::from_str(&std::fs::read_to_string(crate_dir().join("openapi.json")).unwrap()).unwrap()
}

/// Validate `value` against a component schema of the OpenAPI document.
pub fn check_component(doc: &Value, component: &str, value: &Value) -> Result<(), String> {
    let schema = serde_json::json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "components": doc["components"],
        "$ref": format!("#/components/schemas/{component}"),
    });
    let v = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?;
    let errors: Vec<String> = v
        .iter_errors(value)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors.join("; "))
    }
}

/// Validate `value` against `schemas/<name>.schema.json`.
pub fn check_schema(name: &str, value: &Value) -> Result<(), String> {
    let path = crate_dir().join("schemas").join(format!("{name}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let v = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?;
    let errors: Vec<String> = v
        .iter_errors(value)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors.join("; "))
    }
}
