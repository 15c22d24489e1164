//! Effect-size comparison of a listing's CO₂ against typical dwellings of the
//! same bed type in the same city.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::StatsError;
use crate::model::{CityBaseline, SampleStats};

/// Standardized mean difference with pooled (n−1) standard deviation.
pub fn cohens_d(a: &SampleStats, c: &SampleStats) -> Result<f64, StatsError> {
    let n = a.n + c.n;
    if n < 3 {
        return Err(StatsError::InsufficientSamples(n));
    }
    let pooled = ((a.n as f64 - 1.0) * a.sigma.powi(2) + (c.n as f64 - 1.0) * c.sigma.powi(2)) / (n as f64 - 2.0);
    if !(pooled > 0.0) {
        return Err(StatsError::DegenerateVariance);
    }
    Ok((a.mu - c.mu) / pooled.sqrt())
}

/// Bounded percentage form of d: `100·d/√(d² + 4)`.
pub fn cohens_d_percent(d: f64) -> f64 {
    if d.is_infinite() {
        return 100.0 * d.signum();
    }
    100.0 * d / (d * d + 4.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineDiagnostic {
    pub city: String,
    pub bed_type: u8,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BaselineOutcome {
    pub baselines: Vec<CityBaseline>,
    pub diagnostics: Vec<BaselineDiagnostic>,
}

/// One CO₂ observation for a (city, bed type) group.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSample<'a> {
    pub city: &'a str,
    pub bed_type: u8,
    pub co2_avg: f64,
}

/// Group CO₂ averages by (city, bed type). Groups with fewer than two
/// values are dropped with a diagnostic. Output is sorted by group.
pub fn build_baselines<'a>(samples: impl IntoIterator<Item = BaselineSample<'a>>) -> BaselineOutcome {
    let mut groups: BTreeMap<(String, u8), Vec<f64>> = BTreeMap::new();
    for s in samples {
        groups
            .entry((s.city.to_string(), s.bed_type))
            .or_default()
            .push(s.co2_avg);
    }
    let mut out = BaselineOutcome::default();
    for ((city, bed_type), values) in groups {
        if values.len() < 2 {
            out.diagnostics.push(BaselineDiagnostic {
                city,
                bed_type,
                reason: format!("only {} report(s); need at least 2", values.len()),
            });
            continue;
        }
        let s = SampleStats::from_values(&values).expect("nonempty");
        out.baselines.push(CityBaseline {
            city,
            bed_type,
            c_mu: s.mu,
            c_sigma: s.sigma,
            c_n: s.n,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Higher,
    Lower,
}

/// "x.x% Higher/Lower emissions compared to a typical …" label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonLabel {
    /// Rounded to one decimal place.
    pub d_p: f64,
    pub direction: Direction,
    pub reference: String,
}

impl fmt::Display for ComparisonLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dir = match self.direction {
            Direction::Higher => "Higher",
            Direction::Lower => "Lower",
        };
        write!(f, "{:.1}% {dir} emissions compared to a {}", self.d_p, self.reference)
    }
}

/// Either a label or the placeholder shown when data is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Comparison {
    Ready { label: ComparisonLabel, text: String },
    ComingSoon { reason: String },
}

impl Comparison {
    pub fn text(&self) -> &str {
        match self {
            Comparison::Ready { text, .. } => text,
            Comparison::ComingSoon { .. } => "Coming Soon",
        }
    }
}

/// Round half away from zero to one decimal.
pub fn round_one_decimal(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

pub fn reference_text(bed_type: u8, city: &str) -> String {
    if bed_type == 0 {
        format!("typical studio apartment in {city}")
    } else {
        format!("typical {bed_type}-bed apartment in {city}")
    }
}

/// Compare the listing's CO₂ sample against its city/bed-type baseline.
pub fn emissions_comparison(listing: &SampleStats, baseline: &CityBaseline) -> Result<ComparisonLabel, StatsError> {
    let d = cohens_d(listing, &baseline.stats())?;
    let d_p = round_one_decimal(cohens_d_percent(d));
    Ok(ComparisonLabel {
        d_p,
        // a zero difference reads as "0.0% Lower"
        direction: if d_p > 0.0 { Direction::Higher } else { Direction::Lower },
        reference: reference_text(baseline.bed_type, &baseline.city),
    })
}

/// Label or "Coming Soon" when any input is missing or degenerate.
pub fn comparison_or_placeholder(listing: Option<&SampleStats>, baseline: Option<&CityBaseline>) -> Comparison {
    let (Some(l), Some(b)) = (listing, baseline) else {
        return Comparison::ComingSoon {
            reason: if listing.is_none() {
                "no CO₂ estimate"
            } else {
                "no baseline for this city and bed type"
            }
            .into(),
        };
    };
    match emissions_comparison(l, b) {
        Ok(label) => Comparison::Ready {
            text: label.to_string(),
            label,
        },
        Err(e) => Comparison::ComingSoon { reason: e.to_string() },
    }
}

/// Baselines as CSV: `city,bed_type,mu,sigma,n`.
pub fn write_baselines_csv<W: Write>(w: W, baselines: &[CityBaseline]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["city", "bed_type", "mu", "sigma", "n"])?;
    for b in baselines {
        wtr.write_record([
            b.city.clone(),
            b.bed_type.to_string(),
            b.c_mu.to_string(),
            b.c_sigma.to_string(),
            b.c_n.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_baselines_csv<R: Read>(r: R) -> csv::Result<Vec<CityBaseline>> {
    #[derive(Deserialize)]
    struct Row {
        city: String,
        bed_type: u8,
        mu: f64,
        sigma: f64,
        n: usize,
    }
    csv::Reader::from_reader(r)
        .deserialize::<Row>()
        .map(|row| {
            row.map(|r| CityBaseline {
                city: r.city,
                bed_type: r.bed_type,
                c_mu: r.mu,
                c_sigma: r.sigma,
                c_n: r.n,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(mu: f64, sigma: f64, n: usize) -> SampleStats {
        SampleStats { mu, sigma, n }
    }

    #[test]
    fn d_examples() {
        assert_eq!(cohens_d(&s(3.0, 1.0, 5), &s(3.0, 2.0, 7)).unwrap(), 0.0);
        assert_eq!(cohens_d(&s(10.0, 2.0, 20), &s(8.0, 2.0, 20)).unwrap(), 1.0);
        assert_eq!(
            cohens_d(&s(10.0, 0.0, 5), &s(8.0, 0.0, 5)),
            Err(StatsError::DegenerateVariance)
        );
        assert_eq!(
            cohens_d(&s(10.0, 1.0, 1), &s(8.0, 1.0, 1)),
            Err(StatsError::InsufficientSamples(2))
        );
    }

    #[test]
    fn direct_match_uses_baseline_variance() {
        // a_n = 1 contributes nothing to the pooled variance
        let d = cohens_d(&s(2.0, 0.0, 1), &s(3.0, 1.0, 10)).unwrap();
        let pooled = (9.0f64 / 9.0).sqrt();
        assert!((d - (-1.0 / pooled)).abs() < 1e-15);
    }

    #[test]
    fn d_percent_examples() {
        assert_eq!(cohens_d_percent(0.0), 0.0);
        let expected = 100.0 * 2.0 / 8f64.sqrt();
        assert!((cohens_d_percent(2.0) - expected).abs() < 1e-12);
        assert!((cohens_d_percent(2.0) - 70.7107).abs() < 1e-4);
        assert!((cohens_d_percent(-2.0) + 70.7107).abs() < 1e-4);
        assert_eq!(cohens_d_percent(f64::INFINITY), 100.0);
    }

    #[test]
    fn baselines_two_points_and_singletons() {
        let out = build_baselines([
            BaselineSample {
                city: "London",
                bed_type: 1,
                co2_avg: 1.0,
            },
            BaselineSample {
                city: "London",
                bed_type: 1,
                co2_avg: 3.0,
            },
            BaselineSample {
                city: "London",
                bed_type: 2,
                co2_avg: 3.0,
            },
        ]);
        assert_eq!(out.baselines.len(), 1);
        let b = &out.baselines[0];
        assert_eq!((b.c_mu, b.c_n), (2.0, 2));
        assert!((b.c_sigma - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(out.diagnostics.len(), 1);
        assert_eq!(out.diagnostics[0].bed_type, 2);
    }

    #[test]
    fn baselines_ten_point_group() {
        let vals = [1.2, 0.8, 2.5, 1.9, 3.1, 0.6, 1.4, 2.2, 1.7, 2.6];
        let out = build_baselines(vals.iter().map(|v| BaselineSample {
            city: "Bristol",
            bed_type: 2,
            co2_avg: *v,
        }));
        // sum 18.0 → mean 1.8; Σ(x−1.8)² = 5.96 → var 5.96/9
        let b = &out.baselines[0];
        assert!((b.c_mu - 1.8).abs() < 1e-12);
        assert!((b.c_sigma - (5.96f64 / 9.0).sqrt()).abs() < 1e-12);
        assert_eq!(b.c_n, 10);
    }

    #[test]
    fn label_formats() {
        let lower = ComparisonLabel {
            d_p: -34.6,
            direction: Direction::Lower,
            reference: reference_text(1, "London"),
        };
        assert_eq!(
            lower.to_string(),
            "-34.6% Lower emissions compared to a typical 1-bed apartment in London"
        );
        let higher = ComparisonLabel {
            d_p: 4.9,
            direction: Direction::Higher,
            reference: reference_text(2, "London"),
        };
        assert_eq!(
            higher.to_string(),
            "4.9% Higher emissions compared to a typical 2-bed apartment in London"
        );
    }

    #[test]
    fn comparison_direction_and_rounding() {
        let base = CityBaseline {
            city: "London".into(),
            bed_type: 1,
            c_mu: 3.0,
            c_sigma: 1.0,
            c_n: 30,
        };
        let label = emissions_comparison(&s(2.0, 1.0, 5), &base).unwrap();
        assert_eq!(label.direction, Direction::Lower);
        let raw = cohens_d_percent(-1.0);
        assert_eq!(label.d_p, (raw * 10.0).round() / 10.0);
        assert_eq!(round_one_decimal(-34.56), -34.6);
        assert_eq!(round_one_decimal(4.94), 4.9);
    }

    #[test]
    fn placeholder_when_missing() {
        let c = comparison_or_placeholder(Some(&s(2.0, 0.0, 1)), None);
        assert_eq!(c.text(), "Coming Soon");
        let b = CityBaseline {
            city: "X".into(),
            bed_type: 1,
            c_mu: 1.0,
            c_sigma: 0.0,
            c_n: 2,
        };
        let c = comparison_or_placeholder(Some(&s(2.0, 0.0, 1)), Some(&b));
        assert!(matches!(c, Comparison::ComingSoon { .. }));
    }

    #[test]
    fn baselines_csv_round_trip() {
        let b = vec![CityBaseline {
            city: "Milton Keynes".into(),
            bed_type: 3,
            c_mu: 2.25,
            c_sigma: 0.5,
            c_n: 12,
        }];
        let mut buf = Vec::new();
        write_baselines_csv(&mut buf, &b).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("city,bed_type,mu,sigma,n\n"));
        assert_eq!(read_baselines_csv(&buf[..]).unwrap(), b);
    }
}
