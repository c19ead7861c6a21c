use std::fs;
use std::path::PathBuf;

use gpdi_core::stats::ks_matrix_from_samples;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::{csv_bytes, f64_le_values, read_json, require, StageWriter};
use crate::stages::gpdi::GpdiOutput;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsCellOut {
    pub group_a: String,
    pub group_b: String,
    pub d: Option<f64>,
    pub p: Option<f64>,
    pub n_a: Option<usize>,
    pub n_b: Option<usize>,
    pub error: Option<String>,
}

/// Heatmap-ready bundle: dense symmetric matrices with empty diagonals plus
/// the upper-triangle cells.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KsOutput {
    pub seed: u64,
    pub per_group_cap: usize,
    pub method: String,
    pub groups: Vec<String>,
    pub d: Vec<Vec<Option<f64>>>,
    pub p: Vec<Vec<Option<f64>>>,
    pub cells: Vec<KsCellOut>,
}

pub fn run(cfg: &RunConfig) -> CliResult<PathBuf> {
    let g: GpdiOutput = read_json(&cfg.out, "gpdi/gpdi.json")?;
    let mut w = StageWriter::begin(cfg, "ks")?;
    w.record_input("gpdi.json", &cfg.out.join("gpdi/gpdi.json"))?;
    let mut named = Vec::new();
    for row in &g.groups {
        if let Some(file) = &row.sample_file {
            let path = require(&cfg.out, &format!("gpdi/{file}"))?;
            named.push((row.country.clone(), f64_le_values(&fs::read(path)?)?));
        }
    }
    let refs: Vec<(&str, &[f64])> = named.iter().map(|(c, v)| (c.as_str(), v.as_slice())).collect();
    let m = ks_matrix_from_samples(&refs, cfg.ks_cap, cfg.seed)?;

    let cells: Vec<KsCellOut> = m
        .cells
        .iter()
        .map(|c| match &c.result {
            Ok(t) => KsCellOut {
                group_a: c.group_a.clone(),
                group_b: c.group_b.clone(),
                d: Some(t.d),
                p: Some(t.p_value),
                n_a: Some(t.n_a),
                n_b: Some(t.n_b),
                error: None,
            },
            Err(e) => KsCellOut {
                group_a: c.group_a.clone(),
                group_b: c.group_b.clone(),
                d: None,
                p: None,
                n_a: None,
                n_b: None,
                error: Some(format!("{}: {e}", e.code())),
            },
        })
        .collect();
    let csv = csv_bytes(
        &["group_a", "group_b", "D", "p"],
        cells.iter().map(|c| {
            let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            vec![c.group_a.clone(), c.group_b.clone(), f(c.d), f(c.p)]
        }),
    )?;
    w.write("ks_matrix.csv", &csv)?;
    w.counts.insert("groups".into(), m.groups.len() as u64);
    w.counts.insert("tests".into(), m.test_count() as u64);
    w.counts.insert("tests_failed".into(), cells.iter().filter(|c| c.error.is_some()).count() as u64);
    let out = KsOutput {
        seed: cfg.seed,
        per_group_cap: cfg.ks_cap,
        method: "asymptotic".into(),
        d: m.dense(|t| t.d),
        p: m.dense(|t| t.p_value),
        groups: m.groups,
        cells,
    };
    w.write_json("ks_heatmap.json", &out)?;
    w.finish()
}
