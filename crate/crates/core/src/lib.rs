//! Personality-diversity analytics over panels of 30-facet score vectors.
//!
//! The pipeline is `ingest` (score, group, center) → `similarity` (pairwise
//! cosine digests and the diversity index) → `stats` (KS comparison,
//! correlation) → `clustering` (hierarchical, silhouette-driven cuts) →
//! `regression` (standardized OLS, VIF, model ladders, polynomial fits).

pub mod clustering;
pub mod error;
pub mod ingest;
pub mod order;
pub mod regression;
pub mod similarity;
pub mod stats;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
