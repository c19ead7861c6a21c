//! Hierarchical clustering of group medians and of individuals within a group.

mod cut;
mod export;
mod linkage;

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{GroupPanel, FACETS};
use crate::order::median_in_place;
use crate::similarity::sampler::CounterRng;

pub use cut::{cut_labels, cut_tree, select_k, silhouette, ClusterAssignment, KSelection, SilhouetteRow};
pub use export::{heatmap_csv, newick, MergeList};
pub use linkage::{hcluster, LinkageTree, Merge, MAX_POINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Ward,
    Average,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    CosineDistance,
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Linkage::Ward => "ward",
            Linkage::Average => "average",
            Linkage::Complete => "complete",
        })
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ward" => Ok(Linkage::Ward),
            "average" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            other => Err(Error::InvalidArgument(format!("unknown linkage `{other}`"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::CosineDistance => "cosine_distance",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine_distance" | "cosine" => Ok(Metric::CosineDistance),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

/// Per-facet median of each panel, in panel order.
pub fn group_medians(panels: &[GroupPanel]) -> Vec<(String, [f64; FACETS])> {
    panels
        .iter()
        .filter(|p| !p.is_empty())
        .map(|p| {
            let mut column = Vec::with_capacity(p.len());
            let medians = std::array::from_fn(|f| {
                column.clear();
                column.extend(p.members().iter().map(|m| m.facets()[f]));
                median_in_place(&mut column).expect("non-empty panel")
            });
            (p.group_code().to_string(), medians)
        })
        .collect()
}

/// Z-scores each column with the population standard deviation.
pub fn standardize_columns<P: AsRef<[f64]>>(points: &[P]) -> Result<Vec<Vec<f64>>> {
    let n = points.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let dim = points[0].as_ref().len();
    let mut out: Vec<Vec<f64>> = points.iter().map(|p| p.as_ref().to_vec()).collect();
    for c in 0..dim {
        let mean = out.iter().map(|r| r[c]).sum::<f64>() / n as f64;
        let var = out.iter().map(|r| (r[c] - mean) * (r[c] - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        if sd < 1e-12 {
            return Err(Error::DegenerateVariance(format!("column {}", c + 1)));
        }
        for r in &mut out {
            r[c] = (r[c] - mean) / sd;
        }
    }
    Ok(out)
}

/// Seeded draw of `round(fraction * n)` members without replacement, kept in panel order.
pub fn subsample_panel(panel: &GroupPanel, fraction: f64, seed: u64) -> Result<GroupPanel> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("subsample fraction {fraction} outside (0, 1]")));
    }
    let n = panel.len();
    let size = ((fraction * n as f64).round() as usize).min(n);
    if size == n {
        return Ok(panel.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(CounterRng::new(seed, panel.group_code()).at(1));
    let mut picked = sample(&mut rng, n, size).into_vec();
    picked.sort_unstable();
    let members = picked.into_iter().map(|i| panel.members()[i].clone()).collect();
    Ok(GroupPanel::new(panel.group_code(), members))
}
