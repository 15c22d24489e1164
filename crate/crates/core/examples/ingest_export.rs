//! Parse, clean, and deduplicate a certificate export, then infer bedroom
//! counts from floor area.
//!
//! cargo run --example ingest_export -- [export.csv] [city]

use std::fs::File;
use std::path::PathBuf;

use ecograde::ingest::{
    clean_records, dedupe_by_address, infer_bedrooms, parse_epc_export, BedroomLookupTable, CleaningRules, ExportFormat,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/epc/sample.csv"));
    let city = args.next().unwrap_or_else(|| "London".into());
    let format = ExportFormat::from_extension(&path).ok_or("expected a .csv or .jsonl export")?;

    let parsed = parse_epc_export(File::open(&path)?, format)?;
    for d in &parsed.diagnostics {
        println!("row {:>3}: {}", d.row, d.reason);
    }
    let cleaned = clean_records(parsed.records, &CleaningRules::default());
    for (r, why) in &cleaned.rejected {
        println!("rejected {}, {}: {}", r.address_key, r.postcode, why.as_str());
    }
    let kept = dedupe_by_address(cleaned.kept);
    let table = BedroomLookupTable::shipped();
    println!(
        "\n{:<28} {:<9} {:>6} {:>6} {:>6}  beds",
        "address", "postcode", "area", "kwh", "rating"
    );
    for r in &kept {
        let beds = infer_bedrooms(r.floor_area, &city, &table).map_or("?".to_string(), |b| b.to_string());
        let rating = r.headline_rating.map_or("-".to_string(), |l| l.to_string());
        println!(
            "{:<28} {:<9} {:>6.0} {:>6.0} {:>6}  {beds}",
            r.address_key, r.postcode, r.floor_area, r.kwh_per_m2, rating
        );
    }
    Ok(())
}
