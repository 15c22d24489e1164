//! Operator runs: ingest, score, validate. Each writes only under its output
//! directory and leaves a `manifest.json` describing inputs and outputs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::compare::write_baselines_csv;
use crate::error::Error;
use crate::ingest::{
    clean_records, dedupe_by_address, parse_epc_export, write_records_jsonl, write_rejections_csv, CleaningRules,
    Diagnostic, ExportFormat,
};
use crate::score::{Scorer, ScoringConfig};
use crate::store::{file_sha256, store_files, ScoredSnapshot, Store, EPC_FILE};
use crate::validate::{run_validation, write_distribution_files, ValidationParams, ValidationReport};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileFingerprint {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileFingerprint {
    pub fn of(path: &Path) -> Result<Self, Error> {
        Ok(Self {
            path: path.to_path_buf(),
            sha256: file_sha256(path)?,
        })
    }
}

/// Provenance record written alongside every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub inputs: Vec<FileFingerprint>,
    pub seeds: Vec<u64>,
    pub tool_version: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    /// Output paths are relative to the run directory.
    pub outputs: Vec<FileFingerprint>,
}

impl RunManifest {
    fn begin(command: &str, config_path: Option<&Path>) -> Self {
        let now = Utc::now();
        Self {
            command: command.to_string(),
            config_path: config_path.map(Path::to_path_buf),
            inputs: Vec::new(),
            seeds: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: now,
            finished_at: now,
            outputs: Vec::new(),
        }
    }

    /// Fingerprint `outputs` and write the manifest into `dir`.
    fn finish(mut self, dir: &Path, outputs: &[PathBuf]) -> Result<Self, Error> {
        self.outputs = outputs
            .iter()
            .map(|p| {
                let mut f = FileFingerprint::of(p)?;
                f.path = p.strip_prefix(dir).unwrap_or(p).to_path_buf();
                Ok(f)
            })
            .collect::<Result<_, Error>>()?;
        self.finished_at = Utc::now();
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&self)?)?;
        Ok(self)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), Error> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Load cleaning rules, mapping every failure to a configuration error.
pub fn load_rules(path: &Path) -> Result<CleaningRules, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let rules: CleaningRules = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    rules.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(rules)
}

pub fn load_calibration(path: &Path) -> Result<ScoringConfig, Error> {
    ScoringConfig::load(path).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestCounts {
    pub parsed: usize,
    /// Row-level parse problems, including rows dropped outright.
    pub parse_diagnostics: usize,
    pub kept: usize,
    pub rejected: usize,
    /// Certificates discarded as older duplicates of the same address.
    pub deduped: usize,
}

/// Parse → clean → dedupe. Writes `epc.jsonl`, `rejections.csv`,
/// `parse_diagnostics.jsonl`, and the manifest.
pub fn run_ingest(
    sources: &[PathBuf],
    rules: &CleaningRules,
    out: &Path,
    config_path: Option<&Path>,
) -> Result<IngestCounts, Error> {
    let mut manifest = RunManifest::begin("ingest", config_path);
    let mut records = Vec::new();
    let mut diagnostics: Vec<(String, Diagnostic)> = Vec::new();
    let mut counts = IngestCounts::default();
    for src in sources {
        let format = ExportFormat::from_extension(src).ok_or_else(|| {
            Error::Runtime(format!(
                "{}: unknown export format (expected .csv or .jsonl)",
                src.display()
            ))
        })?;
        let file = File::open(src).map_err(|source| Error::Read {
            path: src.clone(),
            source,
        })?;
        let parsed = parse_epc_export(file, format)?;
        tracing::info!(source = %src.display(), records = parsed.records.len(), diagnostics = parsed.diagnostics.len(), "parsed");
        counts.parsed += parsed.records.len();
        diagnostics.extend(parsed.diagnostics.into_iter().map(|d| (src.display().to_string(), d)));
        records.extend(parsed.records);
        manifest.inputs.push(FileFingerprint::of(src)?);
    }
    counts.parse_diagnostics = diagnostics.len();
    let cleaned = clean_records(records, rules);
    counts.rejected = cleaned.rejected.len();
    let before = cleaned.kept.len();
    let kept = dedupe_by_address(cleaned.kept);
    counts.kept = kept.len();
    counts.deduped = before - kept.len();

    fs::create_dir_all(out)?;
    let epc = out.join(EPC_FILE);
    let mut w = create(&epc)?;
    write_records_jsonl(&mut w, &kept)?;
    w.flush()?;
    let rejections = out.join("rejections.csv");
    write_rejections_csv(create(&rejections)?, &cleaned.rejected)?;
    let diag_path = out.join("parse_diagnostics.jsonl");
    let diag_rows: Vec<serde_json::Value> = diagnostics
        .iter()
        .map(|(src, d)| serde_json::json!({"source": src, "row": d.row, "reason": d.reason}))
        .collect();
    write_jsonl(&diag_path, &diag_rows)?;
    manifest.finish(out, &[epc, rejections, diag_path])?;
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreCounts {
    pub listings: usize,
    pub reports: usize,
    pub unscored: usize,
    pub baselines: usize,
    pub fingerprint: String,
}

/// Batch-score a store. Writes `reports.jsonl`, `diagnostics.jsonl`,
/// `baselines.csv`, and the manifest.
pub fn run_score(
    store_dir: &Path,
    calib_path: &Path,
    out: &Path,
    config_path: Option<&Path>,
) -> Result<ScoreCounts, Error> {
    let mut manifest = RunManifest::begin("score", config_path);
    let scorer = Scorer::new(load_calibration(calib_path)?);
    let store = Store::load(store_dir)?;
    manifest.inputs.push(FileFingerprint::of(calib_path)?);
    for p in store_files(store_dir)? {
        manifest.inputs.push(FileFingerprint::of(&p)?);
    }
    let snap = ScoredSnapshot::build(store, &scorer);
    for d in &snap.diagnostics {
        tracing::warn!(listing = %d.listing_id, reason = %d.reason, "not scored");
    }
    fs::create_dir_all(out)?;
    let reports = out.join("reports.jsonl");
    write_jsonl(&reports, &snap.reports.values().collect::<Vec<_>>())?;
    let diags = out.join("diagnostics.jsonl");
    write_jsonl(&diags, &snap.diagnostics)?;
    let baselines = out.join("baselines.csv");
    write_baselines_csv(create(&baselines)?, &snap.baselines)?;
    manifest.finish(out, &[reports, diags, baselines])?;
    Ok(ScoreCounts {
        listings: snap.store.listings.len(),
        reports: snap.reports.len(),
        unscored: snap.diagnostics.len(),
        baselines: snap.baselines.len(),
        fingerprint: snap.fingerprint,
    })
}

/// One validation run per seed, each under `out/seed-<seed>/`.
pub fn run_validate(
    seeds: &[u64],
    cities: &[&str],
    inject_shift: f64,
    scorer: &Scorer,
    out: &Path,
    config_path: Option<&Path>,
) -> Result<Vec<(u64, ValidationReport)>, Error> {
    let mut results = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut manifest = RunManifest::begin("validate", config_path);
        manifest.seeds.push(seed);
        let mut params = ValidationParams::for_cities(cities, seed)?;
        params.inject_shift = inject_shift;
        let run = run_validation(&params, scorer)?;
        let dir = out.join(format!("seed-{seed}"));
        let files = write_distribution_files(&dir, &run.report, &run.scored)?;
        let params_path = dir.join("params.json");
        fs::write(&params_path, serde_json::to_vec_pretty(&params)?)?;
        let mut outputs = files;
        outputs.push(params_path);
        manifest.finish(&dir, &outputs)?;
        results.push((seed, run.report));
    }
    Ok(results)
}
