//! Write a small synthetic store (listings, certificates, transport,
//! suppliers, clients, bookings) that `ecograde score` and `serve` can read.
//!
//! cargo run --example synthetic_store -- <out-dir> [addresses-per-city]

use std::path::PathBuf;

use ecograde::ingest::BedroomLookupTable;
use ecograde::validate::{synthetic_store, CorpusParams, ValidationParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(
        args.next()
            .ok_or("usage: synthetic_store <out-dir> [addresses-per-city]")?,
    );
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(150);

    let mut params = ValidationParams::for_cities(&["London", "Birmingham"], 11)?;
    for c in &mut params.cities {
        c.n_addresses = n;
    }
    let corpus = CorpusParams {
        listings_per_supplier: 10,
        clients: 2,
        bookings_per_client_month: 8,
        ..CorpusParams::default()
    };
    let store = synthetic_store(&params, &corpus, &BedroomLookupTable::shipped())?;
    store.save(&out)?;
    println!(
        "{} listings, {} certificates, {} bookings written to {}",
        store.listings.len(),
        store.index.len(),
        store.bookings.len(),
        out.display()
    );
    Ok(())
}
