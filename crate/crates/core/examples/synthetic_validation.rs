//! Ten synthetic cities, interpolated vs direct scores, TOST at a 0.1 margin.
//!
//! cargo run --release --example synthetic_validation [seed]

use ecograde::score::Scorer;
use ecograde::validate::{run_validation, ValidationParams, DEFAULT_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(DEFAULT_SEED);
    let run = run_validation(&ValidationParams::defaults(seed), &Scorer::default())?;
    let r = &run.report;
    println!(
        "{:<14} {:>5} {:>5} {:>8} {:>8} {:>7}",
        "city", "n_g1", "n_g2", "mean_g1", "mean_g2", "gap"
    );
    for c in &r.by_city {
        println!(
            "{:<14} {:>5} {:>5} {:>8.3} {:>8.3} {:>7.3}",
            c.group,
            c.n_interpolated,
            c.n_direct,
            c.mean_interpolated.unwrap_or(f64::NAN),
            c.mean_direct.unwrap_or(f64::NAN),
            c.gap.unwrap_or(f64::NAN)
        );
    }
    let t = &r.tost;
    println!(
        "diff {:+.4}  p_lower {:.3e}  p_upper {:.3e}  equivalent {}",
        t.mean_diff, t.p_lower, t.p_upper, t.equivalent
    );
    println!("{} listing(s) without a score", r.diagnostics.len());
    Ok(())
}
