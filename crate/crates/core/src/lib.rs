//! EcoGrade: energy-performance scoring for short-term rental listings.
//!
//! The pipeline ingests certificate exports, matches listings to their own
//! certificate or to comparable neighbors, and folds consumption, fabric
//! efficiency, supplier tariff, and transport access into a 0 to 5 leaf score.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod compare;
pub mod error;
pub mod geo;
pub mod ingest;
pub mod matching;
pub mod model;
pub mod pipeline;
pub mod score;
pub mod service;
pub mod stats;
pub mod store;
pub mod validate;

pub use error::{Error, Result};
