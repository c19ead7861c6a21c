use std::path::PathBuf;
use std::time::Instant;

use gpdi_core::ingest::{center_panels, CenteringMode, Exclusion};
use gpdi_core::similarity::{digest, gpdi, ridgeline_rows, DigestExport};
use gpdi_core::stats::capped_sample;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::{csv_bytes, f64_le_bytes, opt, StageWriter};
use crate::panels::load_panels;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpdiRow {
    pub country: String,
    pub n: usize,
    pub mode: Option<String>,
    pub pairs_total: u64,
    pub pairs_positive: Option<u64>,
    pub pairs_drawn: Option<u64>,
    pub median_ln: Option<f64>,
    pub gpdi: Option<f64>,
    pub ci95_halfwidth: Option<f64>,
    pub median_ln_ci95: Option<(f64, f64)>,
    pub error: Option<String>,
    /// Sorted similarity sample for the KS stage, relative to the stage directory.
    pub sample_file: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpdiOutput {
    pub seed: u64,
    pub centering: CenteringMode,
    pub ks_cap: usize,
    pub groups: Vec<GpdiRow>,
    pub exclusions: Vec<Exclusion>,
}

pub fn run(cfg: &RunConfig) -> CliResult<PathBuf> {
    let mut w = StageWriter::begin(cfg, "gpdi")?;
    let started = Instant::now();
    let loaded = load_panels(cfg, Some(&mut w))?;
    w.mark("ingest", started);
    let (centered, transform) = center_panels(&loaded.panels.panels, cfg.centering)?;
    let dc = cfg.digest_config();

    let mut rows = Vec::with_capacity(centered.len());
    let mut ridgeline = Vec::new();
    for panel in &centered {
        let code = panel.group_code().to_string();
        let started = Instant::now();
        let result = digest(panel, &dc);
        let row = match result {
            Ok(d) => {
                let g = gpdi(&d);
                w.write_json(&format!("digests/{code}.json"), &DigestExport::new(&d, g.as_ref()))?;
                let sample_file = format!("samples/{code}.f64le");
                w.write(&sample_file, &f64_le_bytes(&capped_sample(&d, cfg.ks_cap, cfg.seed)))?;
                ridgeline.extend(ridgeline_rows(&d));
                w.groups.insert(code.clone(), d.mode.to_string());
                let (value, ci, ci_ln, err) = match &g {
                    Ok(r) => (Some(r.gpdi), r.ci95_halfwidth, r.median_ln_ci95, None),
                    Err(e) => (None, None, None, Some(format!("{}: {e}", e.code()))),
                };
                GpdiRow {
                    country: code.clone(),
                    n: d.n,
                    mode: Some(d.mode.to_string()),
                    pairs_total: d.pair_count_total,
                    pairs_positive: Some(d.pair_count_positive),
                    pairs_drawn: Some(d.pairs_drawn),
                    median_ln: d.median_ln,
                    gpdi: value,
                    ci95_halfwidth: ci,
                    median_ln_ci95: ci_ln,
                    error: err,
                    sample_file: Some(sample_file),
                }
            }
            Err(e) => GpdiRow {
                country: code.clone(),
                n: panel.len(),
                mode: None,
                pairs_total: panel.pair_count(),
                pairs_positive: None,
                pairs_drawn: None,
                median_ln: None,
                gpdi: None,
                ci95_halfwidth: None,
                median_ln_ci95: None,
                error: Some(format!("{}: {e}", e.code())),
                sample_file: None,
            },
        };
        w.mark(&format!("digest:{code}"), started);
        rows.push(row);
    }

    let csv = csv_bytes(
        &[
            "country", "n", "mode", "pairs_total", "pairs_positive", "pairs_drawn", "median_ln", "gpdi",
            "ci95_halfwidth", "seed", "error",
        ],
        rows.iter().map(|r| {
            vec![
                r.country.clone(),
                r.n.to_string(),
                r.mode.clone().unwrap_or_default(),
                r.pairs_total.to_string(),
                r.pairs_positive.map(|v| v.to_string()).unwrap_or_default(),
                r.pairs_drawn.map(|v| v.to_string()).unwrap_or_default(),
                opt(r.median_ln),
                opt(r.gpdi),
                opt(r.ci95_halfwidth),
                cfg.seed.to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )?;
    w.write("gpdi.csv", &csv)?;
    let ridge = csv_bytes(
        &["country", "bin_lo", "density"],
        ridgeline.iter().map(|r| vec![r.country.clone(), r.bin_lo.to_string(), r.density.to_string()]),
    )?;
    w.write("ridgeline.csv", &ridge)?;
    w.write_json("exclusions.json", &loaded.panels.exclusions)?;
    w.write_json("rejects.json", &loaded.rejects)?;
    w.write_json("transform.json", &transform)?;

    w.counts.insert("groups_admitted".into(), rows.len() as u64);
    w.counts.insert("groups_excluded".into(), loaded.panels.exclusions.len() as u64);
    w.counts.insert("groups_failed".into(), rows.iter().filter(|r| r.error.is_some()).count() as u64);
    w.counts.insert("members_admitted".into(), loaded.panels.member_count() as u64);
    let out = GpdiOutput {
        seed: cfg.seed,
        centering: cfg.centering,
        ks_cap: cfg.ks_cap,
        groups: rows,
        exclusions: loaded.panels.exclusions,
    };
    w.write_json("gpdi.json", &out)?;
    w.finish()
}
