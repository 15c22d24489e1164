//! Query the HTTP API in process over the demo store: search, one report,
//! advice, and both dashboards.

use std::path::PathBuf;

use axum::body::Body;
use axum::http::Request;
use tower::ServiceExt;

use ecograde::score::Scorer;
use ecograde::service::{load_snapshot, router, AppState};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scorer = Scorer::default();
    let snap = load_snapshot(
        &PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo"),
        &scorer,
    )?;
    let app = router(AppState::ready(snap, scorer));
    for uri in [
        "/v1/health",
        "/v1/listings?city=London&per_page=3",
        "/v1/listings/london-0003/ecograde",
        "/v1/listings/london-0003/advice",
        "/v1/suppliers/sup-empty/dashboard",
        "/v1/corporate/client-1/dashboard?as_of=2024-04-01",
        "/v1/listings?sort=price",
    ] {
        let res = app.clone().oneshot(Request::get(uri).body(Body::empty())?).await?;
        let status = res.status();
        let body = axum::body::to_bytes(res.into_body(), usize::MAX).await?;
        let json: serde_json::Value = serde_json::from_slice(&body)?;
        let text = serde_json::to_string(&json)?;
        let short: String = text.chars().take(240).collect();
        println!(
            "GET {uri} -> {status}\n  {short}{}\n",
            if text.len() > 240 { " …" } else { "" }
        );
    }
    Ok(())
}
