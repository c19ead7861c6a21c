//! Within-group pairwise cosine similarity and the diversity index built on it.
//!
//! For a panel of `N` members every unordered pair `(i, j)` contributes a
//! cosine similarity `s`. Only `s > 0` survives, is mapped to `ln s <= 0`,
//! and the index is `1 / |median(ln s)|`.

mod digest;
mod export;
mod index;
mod kernel;
pub mod sampler;

pub use digest::{
    digest, pairwise_digest_exact, pairwise_digest_sampled, DigestConfig, DEFAULT_EXACT_CAP,
    DEFAULT_PAIR_BUDGET, MIN_PAIR_BUDGET,
};
pub use export::{ridgeline_rows, DigestExport, HistogramExport, RidgelineRow};
pub use index::{gpdi, GpdiResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::FacetVector;

pub const HIST_LO: f64 = -30.0;
pub const HIST_WIDTH: f64 = 0.005;
pub const HIST_BINS: usize = 6000;

const MIN_NORM: f64 = 1e-12;

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(x: &FacetVector, y: &FacetVector) -> Result<f64> {
    cosine_slices(x.facets(), y.facets())
}

pub fn cosine_slices(x: &[f64], y: &[f64]) -> Result<f64> {
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx < MIN_NORM || ny < MIN_NORM {
        return Err(Error::ZeroNormVector);
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DigestMode {
    Exact,
    Sampled,
}

impl std::fmt::Display for DigestMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DigestMode::Exact => "exact",
            DigestMode::Sampled => "sampled",
        })
    }
}

/// Fixed-width histogram of ln-similarities over `[-30, 0]` plus an underflow bin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    counts: Vec<u64>,
    underflow: u64,
}

impl Default for Histogram {
    fn default() -> Self {
        Histogram { counts: vec![0; HIST_BINS], underflow: 0 }
    }
}

/// Bin of an ln-similarity; `None` is the underflow bin. `ln s = 0` lands in the last bin.
pub(crate) fn bin_of(ln: f64) -> Option<usize> {
    if ln < HIST_LO {
        None
    } else {
        Some((((ln - HIST_LO) / HIST_WIDTH) as usize).min(HIST_BINS - 1))
    }
}

/// Rank of a bin in value order, underflow first.
pub(crate) fn bin_rank(bin: Option<usize>) -> usize {
    bin.map_or(0, |b| b + 1)
}

impl Histogram {
    pub fn add(&mut self, ln: f64) {
        match bin_of(ln) {
            Some(b) => self.counts[b] += 1,
            None => self.underflow += 1,
        }
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
    }

    pub fn total(&self) -> u64 {
        self.underflow + self.counts.iter().sum::<u64>()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn underflow(&self) -> u64 {
        self.underflow
    }

    /// Counts in rank order (underflow first).
    pub(crate) fn ranked(&self) -> impl Iterator<Item = u64> + '_ {
        std::iter::once(self.underflow).chain(self.counts.iter().copied())
    }

    pub fn bin_lo(bin: usize) -> f64 {
        HIST_LO + bin as f64 * HIST_WIDTH
    }
}

/// Summary of one group's positive ln-similarity multiset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityDigest {
    pub group_code: String,
    /// Panel size.
    pub n: usize,
    pub pair_count_total: u64,
    /// Exact mode: positive pairs in the whole set. Sampled mode: positive draws.
    pub pair_count_positive: u64,
    /// Pairs behind `retained` (all pairs when the store is complete).
    pub pairs_drawn: u64,
    pub histogram: Histogram,
    /// Ln-similarities, sorted ascending.
    pub retained: Vec<f64>,
    /// Whether `retained` is the full positive multiset.
    pub retained_complete: bool,
    pub mode: DigestMode,
    pub seed: u64,
    pub median_ln: Option<f64>,
}

impl SimilarityDigest {
    /// Exact digest over an explicit multiset of ln-similarities, each in `(-inf, 0]`.
    pub fn from_ln_values(group_code: &str, mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v > 0.0) {
            return Err(Error::InvalidArgument("ln-similarities must be finite and <= 0".into()));
        }
        crate::order::sort_f64(&mut values);
        let mut histogram = Histogram::default();
        values.iter().for_each(|&v| histogram.add(v));
        let count = values.len() as u64;
        Ok(SimilarityDigest {
            group_code: group_code.to_string(),
            n: 0,
            pair_count_total: count,
            pair_count_positive: count,
            pairs_drawn: count,
            histogram,
            median_ln: crate::order::median_sorted(&values),
            retained: values,
            retained_complete: true,
            mode: DigestMode::Exact,
            seed: 0,
        })
    }

    /// Share of drawn (or enumerated) pairs whose similarity was positive.
    pub fn positive_fraction(&self) -> f64 {
        match self.mode {
            DigestMode::Exact if self.pair_count_total > 0 => {
                self.pair_count_positive as f64 / self.pair_count_total as f64
            }
            DigestMode::Sampled if self.pairs_drawn > 0 => self.pair_count_positive as f64 / self.pairs_drawn as f64,
            _ => 0.0,
        }
    }
}
