mod common;

use std::collections::BTreeSet;

use axum::http::StatusCode;
use serde_json::Value;

use common::*;
use ecograde::model::{EfficiencyBand as B, EpcAttribute as A, Factor};
use ecograde::score::Scorer;
use ecograde::service::{router, AppState};
use ecograde::store::{Booking, CorporateClient, ScoredSnapshot, Store, Supplier};

fn app(snap: ScoredSnapshot) -> axum::Router {
    router(AppState::ready(snap, Scorer::default()))
}

fn ids(body: &Value) -> Vec<String> {
    body["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["id"].as_str().unwrap().to_string())
        .collect()
}

fn ranked_store() -> (Store, Vec<ecograde::model::EcoGradeReport>) {
    let mut store = Store::default();
    for (id, beds) in [
        ("c", Some(1)),
        ("a", Some(2)),
        ("e", Some(1)),
        ("b", Some(1)),
        ("d", Some(0)),
        ("z", Some(1)),
    ] {
        store.listings.push(listing(id, "London", beds));
    }
    store.listings.push(listing("m", "Bristol", Some(1)));
    let reports = vec![
        flat_report("c", 3.1, None),
        flat_report("a", 4.2, None),
        flat_report("e", 2.0, None),
        flat_report("b", 3.0, None),
        flat_report("d", 3.0, None),
        flat_report("m", 1.0, None),
        // "z" has no report
    ];
    (store, reports)
}

#[tokio::test]
async fn search_orders_by_score_with_id_tiebreak() {
    let (store, reports) = ranked_store();
    let app = app(manual_snapshot(store, reports));

    let r = get(&app, "/v1/listings?city=London&sort=ecograde&order=desc").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(ids(&r.body), ["a", "c", "b", "d", "e", "z"]);
    assert_eq!(r.body["total"], 6);

    let r = get(&app, "/v1/listings?city=london&order=asc").await;
    assert_eq!(ids(&r.body), ["e", "b", "d", "c", "a", "z"], "unscored stays last");
    let z = &r.body["items"][5];
    assert!(z["overall"].is_null() && z["leaves"].is_null());
}

#[tokio::test]
async fn search_filters() {
    let (store, reports) = ranked_store();
    let app = app(manual_snapshot(store, reports));
    let r = get(&app, "/v1/listings?beds=1").await;
    assert_eq!(ids(&r.body), ["c", "b", "e", "m", "z"]);
    let r = get(&app, "/v1/listings?city=Atlantis").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body["total"], 0);
    assert_eq!(r.body["items"], Value::Array(vec![]));
}

#[tokio::test]
async fn malformed_queries_are_problem_documents() {
    let (store, reports) = ranked_store();
    let app = app(manual_snapshot(store, reports));
    for q in [
        "beds=one",
        "order=sideways",
        "page=0",
        "per_page=0",
        "sort=price",
        "colour=green",
    ] {
        let r = get(&app, &format!("/v1/listings?{q}")).await;
        assert_eq!(r.status, StatusCode::BAD_REQUEST, "{q}");
        assert_eq!(r.content_type, "application/problem+json");
        assert_eq!(r.body["code"], "bad_query");
        assert_eq!(r.body["status"], 400);
    }
}

#[tokio::test]
async fn pages_concatenate_to_full_ordering() {
    let snap = scored(synthetic(120));
    let n = snap.store.listings.len();
    let app = app(snap);
    let full = get(&app, "/v1/listings?per_page=200").await.body;
    let full_ids = ids(&full);
    assert_eq!(full_ids.len(), n.min(200));

    let mut paged = Vec::new();
    let mut page = 1;
    loop {
        let r = get(&app, &format!("/v1/listings?per_page=7&page={page}")).await;
        let got = ids(&r.body);
        if got.is_empty() {
            break;
        }
        paged.extend(got);
        page += 1;
    }
    assert_eq!(paged.len(), n);
    assert_eq!(&paged[..full_ids.len()], &full_ids[..]);
    let distinct: BTreeSet<_> = paged.iter().collect();
    assert_eq!(distinct.len(), n, "a permutation of the filtered set");
}

#[tokio::test]
async fn detail_matches_batch_scorer() {
    let store = synthetic(120);
    let batch = Scorer::default().score_all(&store.listings, &store.index, &store.transport);
    let snap = scored(store);
    let app = app(snap);
    for report in batch.reports.iter().step_by(17) {
        let r = get(&app, &format!("/v1/listings/{}/ecograde", report.listing_id)).await;
        assert_eq!(r.status, StatusCode::OK);
        let served: ecograde::model::EcoGradeReport = serde_json::from_value(r.body["report"].clone()).unwrap();
        assert_eq!(&served, report);
    }
    let r = get(&app, "/v1/listings/nope/ecograde").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.body["code"], "not_found");
}

#[tokio::test]
async fn detail_marks_missing_supplier_and_interpolated_range() {
    let snap = scored(synthetic(120));
    let no_tariff = snap
        .store
        .listings
        .iter()
        .find(|l| l.tariff.is_none())
        .unwrap()
        .id
        .clone();
    let interpolated = snap
        .reports
        .values()
        .find(|r| {
            matches!(r.provenance, ecograde::model::Provenance::Interpolated { n_neighbors, .. } if n_neighbors >= 2)
                && r.co2_low < r.co2_high
        })
        .map(|r| r.listing_id.clone())
        .expect("some interpolated listing with spread");
    let app = app(snap);

    let r = get(&app, &format!("/v1/listings/{no_tariff}/ecograde")).await;
    assert!(r.body["report"]["factor_scores"]["supplier"].is_null());
    assert!(r.body["report"]["missing_factors"]
        .as_array()
        .unwrap()
        .contains(&Value::from("supplier")));

    let r = get(&app, &format!("/v1/listings/{interpolated}/ecograde")).await;
    let rep = &r.body["report"];
    assert_eq!(rep["provenance"]["kind"], "interpolated");
    assert!(rep["provenance"]["n_neighbors"].as_u64().unwrap() >= 2);
    assert!(rep["co2_low"].as_f64().unwrap() < rep["co2_high"].as_f64().unwrap());
}

fn advice_store() -> Store {
    let mut store = Store::default();
    let mut weak = listing("weak", "London", Some(1));
    weak.address_key = "1 Weak Street".into();
    let mut strong = listing("strong", "London", Some(1));
    strong.address_key = "2 Strong Street".into();
    store.listings = vec![weak.clone(), strong.clone()];
    let mut weak_bands: Vec<(A, B)> = A::ALL.iter().map(|a| (*a, B::VeryGood)).collect();
    for (a, b) in weak_bands.iter_mut() {
        match a {
            A::Walls => *b = B::VeryPoor,
            A::Lighting => *b = B::Average,
            _ => {}
        }
    }
    let strong_bands: Vec<(A, B)> = A::ALL.iter().map(|a| (*a, B::VeryGood)).collect();
    store.index = ecograde::matching::EpcIndex::build(vec![
        certificate(&weak.address_key, &weak.postcode, 45.0, 150.0, &weak_bands),
        certificate(&strong.address_key, &strong.postcode, 45.0, 150.0, &strong_bands),
    ]);
    store
}

#[tokio::test]
async fn advice_orders_worst_attribute_first() {
    let app = app(scored(advice_store()));
    let r = get(&app, "/v1/listings/weak/advice").await;
    assert_eq!(r.status, StatusCode::OK);
    let items = r.body["items"].as_array().unwrap();
    let attrs: Vec<&str> = items.iter().map(|i| i["attribute"].as_str().unwrap()).collect();
    assert_eq!(attrs, ["walls", "lighting"]);
    assert_eq!(items[0]["current_band"], "very_poor");
    assert_eq!(items[0]["expected_band"], "poor");
    assert_eq!(items[1]["expected_band"], "good");
    for i in items {
        assert!(i["gain"].as_f64().unwrap() > 0.0);
    }
    assert_eq!(r.body["features_inferred"], false);

    let r = get(&app, "/v1/listings/strong/advice").await;
    assert_eq!(r.body["items"], Value::Array(vec![]));
    assert_eq!(
        get(&app, "/v1/listings/ghost/advice").await.status,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn advice_for_interpolated_listing_is_flagged() {
    let snap = scored(synthetic(120));
    let id = snap
        .reports
        .values()
        .find(|r| r.features_inferred)
        .unwrap()
        .listing_id
        .clone();
    let app = app(snap);
    let r = get(&app, &format!("/v1/listings/{id}/advice")).await;
    assert_eq!(r.body["features_inferred"], true);
}

#[allow(clippy::field_reassign_with_default)]
fn corporate_snapshot() -> ScoredSnapshot {
    let mut store = Store::default();
    store.listings = vec![listing("l1", "London", Some(1)), listing("l2", "London", Some(1))];
    store.clients = vec![
        CorporateClient {
            id: "acme".into(),
            name: "Acme".into(),
        },
        CorporateClient {
            id: "idle".into(),
            name: "Idle".into(),
        },
    ];
    let book = |l: &str, m: &str, n: u32| Booking {
        corporate_client_id: "acme".into(),
        listing_id: l.into(),
        month: m.into(),
        nights: n,
    };
    store.bookings = vec![
        book("l1", "2024-01", 73),
        book("l2", "2024-02", 10),
        book("l1", "2024-03", 5),
    ];
    manual_snapshot(
        store,
        vec![flat_report("l1", 2.0, Some(1.0)), flat_report("l2", 2.5, Some(3.65))],
    )
}

#[tokio::test]
async fn corporate_dashboard_months_deltas_and_proration() {
    let app = app(corporate_snapshot());
    let r = get(&app, "/v1/corporate/acme/dashboard?as_of=2024-03-20").await;
    assert_eq!(r.status, StatusCode::OK);
    let months = r.body["months"].as_array().unwrap();
    assert_eq!(months.len(), 2, "March is not complete yet");
    assert_eq!(months[0]["month"], "2024-01");
    assert_eq!(months[0]["factor_deltas"], serde_json::json!({}));
    assert!(months[0]["overall_delta"].is_null());
    // 1.0 t/yr for 73 nights, 3.65 t/yr for 10 nights
    assert!((months[0]["co2_total"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert!((months[1]["co2_total"].as_f64().unwrap() - 0.1).abs() < 1e-12);
    assert!((months[1]["factor_deltas"]["efficiency"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((months[1]["overall_delta"].as_f64().unwrap() - 0.5).abs() < 1e-12);

    let r = get(&app, "/v1/corporate/acme/dashboard?as_of=2024-04-01").await;
    assert_eq!(
        r.body["months"].as_array().unwrap().len(),
        3,
        "a month is complete on the first of the next"
    );

    let r = get(&app, "/v1/corporate/idle/dashboard?as_of=2024-04-01").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body["months"], Value::Array(vec![]));
    assert_eq!(
        get(&app, "/v1/corporate/nobody/dashboard").await.status,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        get(&app, "/v1/corporate/acme/dashboard?as_of=March").await.status,
        StatusCode::BAD_REQUEST
    );
}

#[tokio::test]
async fn corporate_deltas_telescope() {
    let snap = scored(synthetic(120));
    let clients: Vec<String> = snap.store.clients.iter().map(|c| c.id.clone()).collect();
    let app = app(snap);
    for c in clients {
        let r = get(&app, &format!("/v1/corporate/{c}/dashboard?as_of=2025-01-01")).await;
        let months = r.body["months"].as_array().unwrap();
        if months.len() < 2 {
            continue;
        }
        for f in Factor::ALL {
            let key = serde_json::to_value(f).unwrap();
            let key = key.as_str().unwrap();
            let first = months[0]["factor_means"][key].as_f64().unwrap();
            let last = months[months.len() - 1]["factor_means"][key].as_f64().unwrap();
            let sum: f64 = months[1..]
                .iter()
                .map(|m| m["factor_deltas"][key].as_f64().unwrap())
                .sum();
            assert!((sum - (last - first)).abs() < 1e-9, "{c} {key}");
        }
    }
}

#[tokio::test]
async fn supplier_dashboard_rows() {
    let mut snap = scored(synthetic(120));
    let owned = snap.store.suppliers[0].listing_ids.clone();
    snap.store.listings.push(listing("orphan", "London", Some(1)));
    snap.store.suppliers.push(Supplier {
        id: "mixed".into(),
        name: "Mixed".into(),
        listing_ids: vec![owned[0].clone(), "orphan".into()],
    });
    let app = app(snap);

    let r = get(&app, "/v1/suppliers/mixed/dashboard").await;
    assert_eq!(r.status, StatusCode::OK);
    let rows = r.body["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let text = rows[0]["comparison_text"].as_str().unwrap();
    assert!(
        text.contains("% Higher emissions compared to a typical")
            || text.contains("% Lower emissions compared to a typical"),
        "{text}"
    );
    assert_eq!(rows[1]["comparison_text"], "Coming Soon");
    assert_eq!(rows[1]["comparison"]["status"], "coming_soon");
    assert!(rows[1]["overall"].is_null());

    let r = get(&app, "/v1/suppliers/sup-empty/dashboard").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body["rows"], Value::Array(vec![]));
    assert_eq!(
        get(&app, "/v1/suppliers/nobody/dashboard").await.status,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn loading_state_is_503_everywhere() {
    let app = router(AppState::loading(Scorer::default()));
    for uri in [
        "/v1/health",
        "/v1/listings",
        "/v1/listings/x/ecograde",
        "/v1/suppliers/x/dashboard",
    ] {
        let r = get(&app, uri).await;
        assert_eq!(r.status, StatusCode::SERVICE_UNAVAILABLE, "{uri}");
        assert_eq!(r.body["code"], "loading");
    }
}

#[tokio::test]
async fn health_reports_snapshot_fingerprint() {
    let snap = scored(synthetic(60));
    let fp = snap.fingerprint.clone();
    let app = app(snap);
    let r = get(&app, "/v1/health").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body["snapshot_fingerprint"], fp);
    assert_eq!(r.body["version"], env!("CARGO_PKG_VERSION"));
    let r = get(&app, "/v1/nowhere").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.body["code"], "no_route");
}

#[tokio::test]
async fn responses_conform_to_openapi() {
    let doc = openapi();
    let snap = scored(synthetic(120));
    let some_id = snap.store.listings[3].id.clone();
    let inferred = snap
        .reports
        .values()
        .find(|r| r.features_inferred)
        .unwrap()
        .listing_id
        .clone();
    let app = app(snap);
    let cases = [
        ("/v1/health".to_string(), "Health"),
        ("/v1/listings?beds=1&order=asc&per_page=50".to_string(), "SearchPage"),
        (format!("/v1/listings/{some_id}/ecograde"), "ListingDetail"),
        (format!("/v1/listings/{inferred}/advice"), "Advice"),
        (
            "/v1/corporate/client-1/dashboard?as_of=2024-12-01".to_string(),
            "CorporateDashboard",
        ),
        ("/v1/suppliers/sup-london/dashboard".to_string(), "SupplierDashboard"),
        ("/v1/suppliers/sup-empty/dashboard".to_string(), "SupplierDashboard"),
        ("/v1/listings?page=zero".to_string(), "Problem"),
        ("/v1/listings/none/advice".to_string(), "Problem"),
    ];
    for (uri, component) in cases {
        let r = get(&app, &uri).await;
        check_component(&doc, component, &r.body).unwrap_or_else(|e| panic!("{uri}: {e}"));
        // the documented status codes cover what was served
        let path = doc["paths"]
            .as_object()
            .unwrap()
            .iter()
            .find(|(p, _)| {
                let bare = uri.split('?').next().unwrap();
                let segs: Vec<&str> = p.split('/').collect();
                let got: Vec<&str> = bare.split('/').collect();
                segs.len() == got.len() && segs.iter().zip(&got).all(|(s, g)| s.starts_with('{') || s == g)
            })
            .map(|(_, v)| v)
            .unwrap_or_else(|| panic!("{uri} not documented"));
        assert!(
            path["get"]["responses"][r.status.as_str()].is_object(),
            "{uri} → {}",
            r.status
        );
    }
}

#[test]
fn openapi_paths_match_router() {
    let doc = openapi();
    let documented: BTreeSet<&str> = doc["paths"].as_object().unwrap().keys().map(String::as_str).collect();
    let served = BTreeSet::from([
        "/v1/health",
        "/v1/listings",
        "/v1/listings/{id}/ecograde",
        "/v1/listings/{id}/advice",
        "/v1/corporate/{client}/dashboard",
        "/v1/suppliers/{id}/dashboard",
    ]);
    assert_eq!(documented, served);
    let src = std::fs::read_to_string(crate_dir().join("src/service/mod.rs")).unwrap();
    for p in served {
        assert!(src.contains(&format!(".route(\"{p}\"")), "{p} not routed");
    }
}
