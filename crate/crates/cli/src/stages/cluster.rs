use std::collections::BTreeMap;
use std::path::PathBuf;

use gpdi_core::clustering::{
    cut_tree, group_medians, heatmap_csv, hcluster, newick, select_k, standardize_columns, subsample_panel, Linkage,
    MergeList, Metric, SilhouetteRow,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{csv_bytes, StageWriter};
use crate::panels::load_panels;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryClusters {
    pub k: usize,
    pub silhouette: f64,
    pub silhouette_degenerate: bool,
    pub assignment: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualClusters {
    pub country: String,
    pub panel_size: usize,
    pub sampled: usize,
    pub subsample: f64,
    pub chosen_k: usize,
    pub silhouette: Vec<SilhouetteRow>,
    pub cluster_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterOutput {
    pub seed: u64,
    pub linkage: Linkage,
    pub metric: Metric,
    /// Absent when fewer than two groups were admitted.
    pub countries: Option<CountryClusters>,
    pub individuals: IndividualClusters,
}

pub fn run(cfg: &RunConfig) -> CliResult<PathBuf> {
    let mut w = StageWriter::begin(cfg, "cluster")?;
    let loaded = load_panels(cfg, Some(&mut w))?;
    let panels = &loaded.panels.panels;

    // cross-country tree on per-facet medians, standardised across countries
    let countries = if panels.len() >= 2 {
        let medians = group_medians(panels);
        let labels: Vec<String> = medians.iter().map(|(c, _)| c.clone()).collect();
        let points = standardize_columns(&medians.iter().map(|(_, m)| m.to_vec()).collect::<Vec<_>>())?;
        let tree = hcluster(&points, labels.clone(), cfg.metric, cfg.linkage)?;
        let k = cfg.country_k.min(labels.len());
        let cut = cut_tree(&tree, k, &points)?;
        w.write("countries.nwk", format!("{}\n", newick(&tree)).as_bytes())?;
        w.write_json("countries_merges.json", &MergeList::from(&tree))?;
        let rows = labels.iter().zip(&cut.labels).map(|(c, l)| vec![c.clone(), l.to_string()]);
        w.write("country_clusters.csv", &csv_bytes(&["country", "cluster"], rows)?)?;
        Some(CountryClusters {
            k,
            silhouette: cut.silhouette_mean,
            silhouette_degenerate: cut.silhouette_degenerate,
            assignment: labels.into_iter().zip(cut.labels).collect(),
        })
    } else {
        None
    };

    // in-country clustering on a seeded subsample
    let panel = match &cfg.country {
        Some(code) => panels.iter().find(|p| p.group_code() == code).ok_or_else(|| {
            CliError::data("UNKNOWN_GROUP", format!("group {code} is not among the admitted groups"))
        })?,
        None => panels.iter().fold(&panels[0], |best, p| if p.len() > best.len() { p } else { best }),
    };
    let code = panel.group_code().to_string();
    let sample = subsample_panel(panel, cfg.subsample, cfg.seed)?;
    let raw: Vec<Vec<f64>> = sample.members().iter().map(|m| m.facets().to_vec()).collect();
    let points = standardize_columns(&raw)?;
    let labels: Vec<String> = (0..points.len()).map(|i| format!("{code}-{i}")).collect();
    let tree = hcluster(&points, labels.clone(), cfg.metric, cfg.linkage)?;
    let selection = select_k(&tree, &cfg.k_candidates, &points)?;
    let cut = cut_tree(&tree, selection.chosen, &points)?;

    let sil_rows = selection.table.iter().map(|r| {
        vec![r.k.to_string(), r.silhouette.to_string(), r.degenerate.to_string(), (r.k == selection.chosen).to_string()]
    });
    w.write("silhouette.csv", &csv_bytes(&["k", "silhouette", "degenerate", "chosen"], sil_rows)?)?;
    let assign = labels.iter().zip(&cut.labels).map(|(m, l)| vec![m.clone(), l.to_string()]);
    w.write("assignments.csv", &csv_bytes(&["member", "cluster"], assign)?)?;
    w.write("heatmap.csv", heatmap_csv(&tree, &points, &cut)?.as_bytes())?;
    w.write_json("individuals_merges.json", &MergeList::from(&tree))?;

    let mut cluster_sizes = vec![0usize; cut.k];
    for &l in &cut.labels {
        cluster_sizes[l] += 1;
    }
    w.counts.insert("groups".into(), panels.len() as u64);
    w.counts.insert("members_clustered".into(), points.len() as u64);
    let out = ClusterOutput {
        seed: cfg.seed,
        linkage: cfg.linkage,
        metric: cfg.metric,
        countries,
        individuals: IndividualClusters {
            country: code,
            panel_size: panel.len(),
            sampled: sample.len(),
            subsample: cfg.subsample,
            chosen_k: selection.chosen,
            silhouette: selection.table,
            cluster_sizes,
        },
    };
    w.write_json("clusters.json", &out)?;
    w.finish()
}
