//! Walking access to green transport from one point: nearest option per
//! mode over fixed stops and mobile snapshots.
//!
//! cargo run --example transport_access -- [lat] [lon]

use std::path::PathBuf;

use ecograde::geo::{access_summary, haversine_km, GeoPoint};
use ecograde::store::Store;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args().skip(1).map(|s| s.parse()).collect::<Result<_, _>>()?;
    let here = GeoPoint::new(*args.first().unwrap_or(&51.515), *args.get(1).unwrap_or(&-0.09))?;

    let london = GeoPoint::new(51.5074, -0.1278)?;
    let paris = GeoPoint::new(48.8566, 2.3522)?;
    println!("London to Paris: {:.1} km", haversine_km(london, paris));

    let store = Store::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo"))?;
    let t = &store.transport;
    let access = access_summary(here, &t.fixed, &t.snapshots)?;
    println!(
        "from ({}, {}): {} fixed points, {} snapshots",
        here.phi,
        here.lambda,
        t.fixed.len(),
        t.snapshots.len()
    );
    for (mode, km) in &access.nearest_km {
        println!(
            "  {:<14} {:>7.3} km {:>6.1} min",
            mode.to_string(),
            km,
            access.time_hours[mode] * 60.0
        );
    }
    for mode in &access.missing_modes {
        println!("  {:<14} none", mode.to_string());
    }
    println!("mean walking time {:.1} min", access.mean_time_hours * 60.0);
    Ok(())
}
