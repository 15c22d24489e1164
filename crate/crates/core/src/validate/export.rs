//! Histogram and raw-score exports for plotting validation runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ScoreGroup, ScoredListing, ValidationReport};
use crate::error::ValidateError;

pub const BIN_WIDTH: f64 = 0.25;
const N_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    City,
    BedType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub key: String,
    pub group: ScoreGroup,
    /// Raw scores, ascending, for raincloud-style plots.
    pub values: Vec<f64>,
    pub bins: Vec<HistogramBin>,
}

fn histogram(values: &[f64]) -> Vec<HistogramBin> {
    let mut bins: Vec<HistogramBin> = (0..N_BINS)
        .map(|i| HistogramBin {
            low: i as f64 * BIN_WIDTH,
            high: (i + 1) as f64 * BIN_WIDTH,
            count: 0,
        })
        .collect();
    for &v in values {
        // bins are [low, high) except the last, which also takes 5.0
        let i = ((v / BIN_WIDTH).floor().max(0.0) as usize).min(N_BINS - 1);
        bins[i].count += 1;
    }
    bins
}

fn key_of(s: &ScoredListing, by: GroupBy) -> String {
    match by {
        GroupBy::City => s.listing.city.clone(),
        GroupBy::BedType => s
            .listing
            .bedrooms
            .map(|b| b.to_string())
            .unwrap_or_else(|| "unknown".into()),
    }
}

/// Score distributions per key and group, with `shift` added to interpolated scores.
pub fn export_distributions(scored: &[ScoredListing], by: GroupBy, shift: f64) -> Vec<Distribution> {
    let mut acc: BTreeMap<(String, u8), (ScoreGroup, Vec<f64>)> = BTreeMap::new();
    for s in scored {
        let (rank, v) = match s.group {
            ScoreGroup::Interpolated => (0, s.report.overall + shift),
            ScoreGroup::Direct => (1, s.report.overall),
        };
        acc.entry((key_of(s, by), rank))
            .or_insert_with(|| (s.group, Vec::new()))
            .1
            .push(v);
    }
    acc.into_iter()
        .map(|((key, _), (group, mut values))| {
            values.sort_by(f64::total_cmp);
            let bins = histogram(&values);
            Distribution {
                key,
                group,
                values,
                bins,
            }
        })
        .collect()
}

fn write_histograms(path: &Path, dists: &[Distribution]) -> Result<(), ValidateError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["key", "group", "bin_low", "bin_high", "count"])?;
    for d in dists {
        let group = match d.group {
            ScoreGroup::Interpolated => "interpolated",
            ScoreGroup::Direct => "direct",
        };
        for b in &d.bins {
            w.write_record([
                d.key.as_str(),
                group,
                &b.low.to_string(),
                &b.high.to_string(),
                &b.count.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write `summary.json`, `scores.csv`, and the two histogram tables into `dir`.
/// Returns the files written.
pub fn write_distribution_files(
    dir: &Path,
    report: &ValidationReport,
    scored: &[ScoredListing],
) -> Result<Vec<PathBuf>, ValidateError> {
    fs::create_dir_all(dir)?;
    let summary = dir.join("summary.json");
    fs::write(&summary, serde_json::to_vec_pretty(report)?)?;

    let raw = dir.join("scores.csv");
    let mut w = csv::Writer::from_path(&raw)?;
    w.write_record(["listing_id", "city", "bedrooms", "group", "overall", "leaves"])?;
    for s in scored {
        let group = match s.group {
            ScoreGroup::Interpolated => "interpolated",
            ScoreGroup::Direct => "direct",
        };
        w.write_record([
            s.listing.id.as_str(),
            s.listing.city.as_str(),
            &s.listing.bedrooms.map(|b| b.to_string()).unwrap_or_default(),
            group,
            &s.report.overall.to_string(),
            &s.report.leaves.to_string(),
        ])?;
    }
    w.flush()?;

    let by_city = dir.join("histogram_by_city.csv");
    write_histograms(
        &by_city,
        &export_distributions(scored, GroupBy::City, report.inject_shift),
    )?;
    let by_bed = dir.join("histogram_by_bed_type.csv");
    write_histograms(
        &by_bed,
        &export_distributions(scored, GroupBy::BedType, report.inject_shift),
    )?;
    Ok(vec![summary, raw, by_city, by_bed])
}
