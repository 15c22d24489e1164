//! Two one-sided tests on two small samples across a range of margins.

use ecograde::validate::tost_equivalence;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let interpolated = [2.61, 2.48, 2.75, 2.52, 2.69, 2.58, 2.44, 2.71, 2.63, 2.55];
    let direct = [2.57, 2.66, 2.49, 2.71, 2.60, 2.53, 2.68, 2.62, 2.50, 2.59];
    println!(
        "{:>7} {:>10} {:>10} {:>11}",
        "margin", "p_lower", "p_upper", "equivalent"
    );
    for margin in [0.02, 0.05, 0.1, 0.2] {
        let r = tost_equivalence(&interpolated, &direct, margin, 0.05)?;
        println!(
            "{margin:>7.2} {:>10.4} {:>10.4} {:>11}",
            r.p_lower, r.p_upper, r.equivalent
        );
    }
    Ok(())
}
