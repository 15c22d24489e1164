use std::path::PathBuf;

use thiserror::Error;

use crate::geo::TransportMode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unrecognized efficiency band label {0:?}")]
    UnknownBand(String),
    #[error("unrecognized rating letter {0:?}")]
    UnknownRating(String),
    #[error("coordinates out of range: lat {lat}, lon {lon}")]
    Coordinates { lat: f64, lon: f64 },
    #[error("renewable fraction {0} outside [0, 1]")]
    RenewableFraction(f64),
    #[error("meter reading {0} is negative")]
    NegativeMeter(f64),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("city {0:?} is not covered by the bedroom lookup table")]
    UnknownCity(String),
    #[error("floor area {area} m² outside the lookup span for {city}")]
    OutOfRange { city: String, area: f64 },
    #[error("invalid cleaning rules: {0}")]
    InvalidRules(String),
    #[error("invalid bedroom table: {0}")]
    InvalidTable(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("invalid point: lat {phi}, lon {lambda}")]
    InvalidPoint { phi: f64, lambda: f64 },
    #[error("no {0} option in any snapshot")]
    NoOption(TransportMode),
    #[error("no transport data for this location")]
    NoTransportData,
    #[error("negative distance {0}")]
    NegativeDistance(f64),
    #[error("mobile point for {0} is missing observed_at")]
    MissingObservation(TransportMode),
}

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("no comparable certificates for {0}")]
    NoComparableData(String),
    #[error("listing {0} has no bedroom count")]
    MissingBedrooms(String),
    #[error(transparent)]
    Bedrooms(#[from] IngestError),
    #[error("interpolation needs at least one neighbor")]
    EmptyNeighbors,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("factor unavailable")]
    FactorUnavailable,
    #[error("no factor available to score")]
    NoScore,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("pooled variance is zero")]
    DegenerateVariance,
    #[error("need a_n + c_n >= 3, got {0}")]
    InsufficientSamples(usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no comparable data")]
    NoComparableData,
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Errors surfaced by the store and the operator commands.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Validate(#[from] ValidateError),
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Ingest(IngestError::InvalidRules(_) | IngestError::InvalidTable(_)) => 2,
            Error::Validate(ValidateError::Config(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
