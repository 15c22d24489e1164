//! Score one listing three ways: with its own certificate, from similar
//! neighbors, and from a smart meter reading.

use chrono::NaiveDate;

use ecograde::geo::{GeoPoint, TransportMode, TransportPoint};
use ecograde::matching::EpcIndex;
use ecograde::model::{EcoGradeReport, EfficiencyBand, EpcAttribute, EpcRecord, Listing, Tariff};
use ecograde::score::{Scorer, TransportData};

fn cert(address: &str, area: f64, kwh: f64, walls: EfficiencyBand) -> EpcRecord {
    EpcRecord {
        address_key: address.into(),
        postcode: "E1 6AN".into(),
        floor_area: area,
        bands: [
            (EpcAttribute::Walls, walls),
            (EpcAttribute::Windows, EfficiencyBand::Good),
            (EpcAttribute::Lighting, EfficiencyBand::VeryGood),
        ]
        .into_iter()
        .collect(),
        kwh_per_m2: kwh,
        lodgement_date: NaiveDate::from_ymd_opt(2022, 5, 1).unwrap(),
        headline_rating: None,
        main_fuel: Some("mains gas".into()),
    }
}

fn show(label: &str, r: &EcoGradeReport) {
    let f = &r.factor_scores;
    let fmt = |v: Option<f64>| v.map_or("  -  ".to_string(), |v| format!("{v:.2}"));
    println!(
        "{label:<10} consumption {} efficiency {} supplier {} transport {} | overall {:.2} ({} leaves) co2 {:?} t/yr, {:?}",
        fmt(f.consumption),
        fmt(f.efficiency),
        fmt(f.supplier),
        fmt(f.transport),
        r.overall,
        r.leaves,
        r.co2_avg.map(|c| (c * 100.0).round() / 100.0),
        r.provenance
    );
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scorer = Scorer::default();
    let stop = |phi: f64, lambda: f64, mode| TransportPoint {
        location: GeoPoint { phi, lambda },
        mode,
        observed_at: None,
    };
    let transport = TransportData {
        fixed: vec![
            stop(51.516, -0.072, TransportMode::BusStop),
            stop(51.515, -0.078, TransportMode::MetroStation),
            stop(51.518, -0.070, TransportMode::BikeShare),
        ],
        snapshots: Vec::new(),
    };
    let mut listing = Listing {
        id: "demo-1".into(),
        address_key: "Flat 3, 12 Mill Lane".into(),
        postcode: "E1 6AN".into(),
        latitude: 51.517,
        longitude: -0.071,
        bedrooms: Some(1),
        city: "London".into(),
        tariff: Some(Tariff {
            renewable_fraction: 0.6,
            gas_main_heat: true,
        }),
        meter_kwh_per_m2: None,
    };

    let own = EpcIndex::build(vec![cert("Flat 3, 12 Mill Lane", 48.0, 190.0, EfficiencyBand::Poor)]);
    show("direct", &scorer.score(&listing, &own, &transport)?);

    let neighbors = EpcIndex::build(vec![
        cert("Flat 1, 12 Mill Lane", 45.0, 170.0, EfficiencyBand::Average),
        cert("Flat 2, 12 Mill Lane", 50.0, 210.0, EfficiencyBand::Poor),
        cert("Flat 4, 12 Mill Lane", 47.0, 160.0, EfficiencyBand::Good),
    ]);
    show("neighbors", &scorer.score(&listing, &neighbors, &transport)?);

    listing.meter_kwh_per_m2 = Some(140.0);
    show("meter", &scorer.score(&listing, &neighbors, &transport)?);
    Ok(())
}
