//! HTTP JSON API over a scored snapshot, versioned under `/v1`.
//!
//! Requests read an immutable [`ScoredSnapshot`] behind an `Arc`; loading a
//! new store swaps the pointer. Until the first snapshot is installed every
//! endpoint answers 503.

mod config;
pub mod views;

use std::collections::BTreeMap;
use std::future::{Future, IntoFuture};
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::QueryRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::NaiveDate;
use serde::Serialize;
use serde_json::json;

pub use config::{ServiceConfig, ENV_DATA_DIR, ENV_PORT};

use crate::error::Error;
use crate::score::Scorer;
use crate::store::{ScoredSnapshot, Store};
use views::SearchQuery;

/// Machine-readable error body (`application/problem+json`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Problem {
    #[serde(rename = "type")]
    pub kind: String,
    pub title: String,
    pub status: u16,
    pub code: String,
    pub detail: String,
}

impl Problem {
    pub fn new(status: StatusCode, code: &str, detail: impl Into<String>) -> Self {
        Self {
            kind: format!("urn:ecograde:problem:{code}"),
            title: status.canonical_reason().unwrap_or("Error").to_string(),
            status: status.as_u16(),
            code: code.to_string(),
            detail: detail.into(),
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no {what} with id {id:?}"))
    }
}

impl IntoResponse for Problem {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, [(header::CONTENT_TYPE, "application/problem+json")], Json(self)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, Problem>;

#[derive(Clone)]
pub struct AppState {
    snapshot: Arc<RwLock<Option<Arc<ScoredSnapshot>>>>,
    scorer: Arc<Scorer>,
}

impl AppState {
    /// State with no snapshot yet; requests get 503 until [`AppState::install`].
    pub fn loading(scorer: Scorer) -> Self {
        Self {
            snapshot: Arc::new(RwLock::new(None)),
            scorer: Arc::new(scorer),
        }
    }

    pub fn ready(snapshot: ScoredSnapshot, scorer: Scorer) -> Self {
        let s = Self::loading(scorer);
        s.install(snapshot);
        s
    }

    /// Atomically replace the served snapshot.
    pub fn install(&self, snapshot: ScoredSnapshot) {
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(snapshot));
    }

    fn current(&self) -> Result<Arc<ScoredSnapshot>, Problem> {
        self.snapshot
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
            .ok_or_else(|| Problem::new(StatusCode::SERVICE_UNAVAILABLE, "loading", "store is still loading"))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/listings", get(listings))
        .route("/v1/listings/{id}/ecograde", get(ecograde))
        .route("/v1/listings/{id}/advice", get(advice))
        .route("/v1/corporate/{client}/dashboard", get(corporate))
        .route("/v1/suppliers/{id}/dashboard", get(supplier))
        .fallback(|| async { Problem::new(StatusCode::NOT_FOUND, "no_route", "no such endpoint") })
        .with_state(state)
}

async fn health(State(s): State<AppState>) -> Result<Json<serde_json::Value>, Problem> {
    let snap = s.current()?;
    Ok(Json(json!({
        "status": "ok",
        "version": env!("CARGO_PKG_VERSION"),
        "snapshot_fingerprint": snap.fingerprint,
        "listings": snap.store.listings.len(),
        "reports": snap.reports.len(),
    })))
}

fn bad_query(e: QueryRejection) -> Problem {
    Problem::new(StatusCode::BAD_REQUEST, "bad_query", e.body_text())
}

async fn listings(
    State(s): State<AppState>,
    q: Result<Query<BTreeMap<String, String>>, QueryRejection>,
) -> ApiResult<views::SearchPage> {
    let snap = s.current()?;
    let Query(params) = q.map_err(bad_query)?;
    let query = SearchQuery::parse(&params).map_err(|e| Problem::new(StatusCode::BAD_REQUEST, "bad_query", e))?;
    Ok(Json(views::search(&snap, &query)))
}

async fn ecograde(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<views::ListingDetail> {
    let snap = s.current()?;
    views::listing_detail(&snap, &id)
        .map(Json)
        .ok_or_else(|| Problem::not_found("listing", &id))
}

async fn advice(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<views::Advice> {
    let snap = s.current()?;
    views::advice(&snap, &s.scorer, &id)
        .map(Json)
        .ok_or_else(|| Problem::not_found("listing", &id))
}

async fn corporate(
    State(s): State<AppState>,
    UrlPath(client): UrlPath<String>,
    q: Result<Query<BTreeMap<String, String>>, QueryRejection>,
) -> ApiResult<views::CorporateDashboard> {
    let snap = s.current()?;
    let Query(params) = q.map_err(bad_query)?;
    let mut as_of = chrono::Utc::now().date_naive();
    for (k, v) in &params {
        match k.as_str() {
            "as_of" => {
                as_of = NaiveDate::parse_from_str(v, "%Y-%m-%d").map_err(|_| {
                    Problem::new(
                        StatusCode::BAD_REQUEST,
                        "bad_query",
                        format!("as_of must be YYYY-MM-DD, got {v:?}"),
                    )
                })?
            }
            _ => {
                return Err(Problem::new(
                    StatusCode::BAD_REQUEST,
                    "bad_query",
                    format!("unknown query parameter {k:?}"),
                ))
            }
        }
    }
    views::corporate_dashboard(&snap, &client, as_of)
        .map(Json)
        .ok_or_else(|| Problem::not_found("corporate client", &client))
}

async fn supplier(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<views::SupplierDashboard> {
    let snap = s.current()?;
    views::supplier_dashboard(&snap, &id)
        .map(Json)
        .ok_or_else(|| Problem::not_found("supplier", &id))
}

/// Load and score a store directory.
pub fn load_snapshot(dir: &Path, scorer: &Scorer) -> Result<ScoredSnapshot, Error> {
    Ok(ScoredSnapshot::build(Store::load(dir)?, scorer))
}

/// Bind, load the store in the background, and serve until `shutdown` resolves.
///
/// Binding happens first so a busy port fails before any loading work.
pub async fn serve(
    config: &ServiceConfig,
    scorer: Scorer,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), Error> {
    let addr = format!("{}:{}", config.bind, config.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| Error::Runtime(format!("cannot bind {addr}: {e}")))?;
    tracing::info!(%addr, "listening");
    let state = AppState::loading(scorer.clone());
    let loader = state.clone();
    let dir = config.data_dir.clone();
    let load = tokio::task::spawn_blocking(move || {
        let snap = load_snapshot(&dir, &scorer)?;
        tracing::info!(
            listings = snap.store.listings.len(),
            reports = snap.reports.len(),
            fingerprint = %snap.fingerprint,
            "store loaded"
        );
        loader.install(snap);
        Ok::<_, Error>(())
    });
    let server = tokio::spawn(
        axum::serve(listener, router(state))
            .with_graceful_shutdown(shutdown)
            .into_future(),
    );
    let loaded = match load.await {
        Ok(r) => r,
        Err(e) => Err(Error::Runtime(format!("store loader failed: {e}"))),
    };
    if let Err(e) = loaded {
        server.abort();
        return Err(e);
    }
    server
        .await
        .map_err(|e| Error::Runtime(format!("server task failed: {e}")))?
        .map_err(Error::Io)?;
    Ok(())
}
