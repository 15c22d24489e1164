//! A complete store built from synthetic cities: listings, certificates,
//! transport, plus suppliers, corporate clients, and monthly bookings.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{generate_city, ValidateError, ValidationParams};
use crate::ingest::{clean_records, dedupe_by_address, BedroomLookupTable, CleaningRules};
use crate::matching::EpcIndex;
use crate::store::{Booking, CorporateClient, Store, Supplier};

/// Months of booking history generated for each client.
pub const BOOKING_MONTHS: [&str; 6] = ["2024-01", "2024-02", "2024-03", "2024-04", "2024-05", "2024-06"];

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusParams {
    pub seed: u64,
    pub listings_per_supplier: usize,
    pub clients: usize,
    pub bookings_per_client_month: usize,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            seed: 7,
            listings_per_supplier: 25,
            clients: 3,
            bookings_per_client_month: 20,
        }
    }
}

fn slug(s: &str) -> String {
    s.to_ascii_lowercase().split_whitespace().collect::<Vec<_>>().join("-")
}

/// Generate every city in `cities` and assemble one store. Each city gets a
/// supplier owning its first listings; one extra supplier owns nothing.
pub fn synthetic_store(
    cities: &ValidationParams,
    corpus: &CorpusParams,
    bedrooms: &BedroomLookupTable,
) -> Result<Store, ValidateError> {
    let mut store = Store::default();
    let mut certificates = Vec::new();
    for p in &cities.cities {
        let city = generate_city(p, bedrooms)?;
        let owned: Vec<String> = city
            .listings
            .iter()
            .take(corpus.listings_per_supplier)
            .map(|l| l.id.clone())
            .collect();
        store.suppliers.push(Supplier {
            id: format!("sup-{}", slug(&p.city)),
            name: format!("{} Serviced Apartments", p.city),
            listing_ids: owned,
        });
        store.listings.extend(city.listings);
        certificates.extend(city.certificates);
        store.transport.fixed.extend(city.fixed_transport);
        store.transport.snapshots.extend(city.snapshots);
    }
    store.transport.snapshots.sort_by_key(|s| s.captured_at);
    store.suppliers.push(Supplier {
        id: "sup-empty".into(),
        name: "New Supplier Ltd".into(),
        listing_ids: Vec::new(),
    });
    let kept = clean_records(certificates, &CleaningRules::default()).kept;
    store.index = EpcIndex::build(dedupe_by_address(kept));

    let mut rng = ChaCha8Rng::seed_from_u64(corpus.seed);
    let mut ids: Vec<&str> = store.listings.iter().map(|l| l.id.as_str()).collect();
    for c in 0..corpus.clients {
        let id = format!("client-{}", c + 1);
        for month in BOOKING_MONTHS {
            ids.shuffle(&mut rng);
            for listing in ids.iter().take(corpus.bookings_per_client_month) {
                store.bookings.push(Booking {
                    corporate_client_id: id.clone(),
                    listing_id: listing.to_string(),
                    month: month.to_string(),
                    nights: rng.random_range(1..=28),
                });
            }
        }
        store.clients.push(CorporateClient {
            id,
            name: format!("Corporate Client {}", c + 1),
        });
    }
    store.clients.push(CorporateClient {
        id: "client-idle".into(),
        name: "Idle Client".into(),
    });
    store
        .check()
        .map_err(|e| ValidateError::Config(format!("generated store is inconsistent: {e}")))?;
    Ok(store)
}
