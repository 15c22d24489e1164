//! Effect-size label for a listing's CO₂ against its city and bed-type
//! baseline.
//!
//! cargo run --example emissions_comparison -- [listing-mean] [baseline-mean]

use ecograde::compare::{cohens_d, cohens_d_percent, emissions_comparison};
use ecograde::model::{CityBaseline, SampleStats};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args().skip(1).map(|s| s.parse()).collect::<Result<_, _>>()?;
    let listing = SampleStats {
        mu: *args.first().unwrap_or(&1.1),
        sigma: 0.25,
        n: 5,
    };
    let baseline = CityBaseline {
        city: "London".into(),
        bed_type: 1,
        c_mu: *args.get(1).unwrap_or(&1.4),
        c_sigma: 0.45,
        c_n: 240,
    };
    let d = cohens_d(&listing, &baseline.stats())?;
    println!("d = {d:.4}, d% = {:.4}", cohens_d_percent(d));
    println!("{}", emissions_comparison(&listing, &baseline)?);
    Ok(())
}
