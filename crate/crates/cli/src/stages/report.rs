use std::path::PathBuf;

use gpdi_core::clustering::{Linkage, Metric, SilhouetteRow};
use gpdi_core::ingest::Exclusion;
use gpdi_core::regression::stars;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::{read_json, StageWriter};
use crate::stages::cluster::ClusterOutput;
use crate::stages::gpdi::GpdiOutput;
use crate::stages::ks::KsOutput;

pub const SCHEMA: &str = include_str!("../report.schema.json");

const STAGE_FILES: [&str; 4] = ["gpdi/gpdi.json", "ks/ks_heatmap.json", "cluster/clusters.json", "regress/regression.json"];

#[derive(Deserialize)]
struct RegressIn {
    response: String,
    ladder: LadderIn,
    comparison: Option<ComparisonIn>,
}

#[derive(Deserialize)]
struct LadderIn {
    rows: Vec<String>,
    models: Vec<ModelIn>,
}

#[derive(Deserialize)]
struct ModelIn {
    model: String,
    predictors: Vec<String>,
    report: Option<FitIn>,
    error: Option<String>,
}

#[derive(Deserialize)]
struct FitIn {
    n: usize,
    r2: f64,
    adj_r2: f64,
    f_p_value: f64,
}

#[derive(Deserialize)]
struct ComparisonIn {
    delta_adj_r2: Option<f64>,
}

#[derive(Debug, Serialize)]
struct KsSummary {
    tests: usize,
    mean_d: Option<f64>,
    max_d: Option<f64>,
    significant_05: usize,
}

#[derive(Debug, Serialize)]
struct GroupReport {
    country: String,
    n: usize,
    mode: Option<String>,
    gpdi: Option<f64>,
    median_ln: Option<f64>,
    ci95_halfwidth: Option<f64>,
    error: Option<String>,
    country_cluster: Option<usize>,
    ks: KsSummary,
}

#[derive(Debug, Serialize)]
struct KsReport {
    per_group_cap: usize,
    tests: usize,
    failed: usize,
}

#[derive(Debug, Serialize)]
struct InCountry {
    country: String,
    sampled: usize,
    chosen_k: usize,
    silhouette: Vec<SilhouetteRow>,
}

#[derive(Debug, Serialize)]
struct ClusteringReport {
    linkage: Linkage,
    metric: Metric,
    country_k: Option<usize>,
    in_country: InCountry,
}

#[derive(Debug, Serialize)]
struct ModelReport {
    model: String,
    predictors: Vec<String>,
    n: Option<usize>,
    r2: Option<f64>,
    adj_r2: Option<f64>,
    stars: String,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct RegressionReport {
    response: String,
    rows: usize,
    models: Vec<ModelReport>,
    delta_adj_r2: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Report {
    engine: &'static str,
    version: &'static str,
    seed: u64,
    groups: Vec<GroupReport>,
    excluded: Vec<Exclusion>,
    ks: KsReport,
    clustering: ClusteringReport,
    regression: RegressionReport,
}

pub fn run(cfg: &RunConfig) -> CliResult<PathBuf> {
    // check every dependency up front so the error names the first missing file
    for f in STAGE_FILES {
        crate::output::require(&cfg.out, f)?;
    }
    let g: GpdiOutput = read_json(&cfg.out, STAGE_FILES[0])?;
    let ks: KsOutput = read_json(&cfg.out, STAGE_FILES[1])?;
    let cl: ClusterOutput = read_json(&cfg.out, STAGE_FILES[2])?;
    let rg: RegressIn = read_json(&cfg.out, STAGE_FILES[3])?;

    let mut w = StageWriter::begin(cfg, "report")?;
    for f in STAGE_FILES {
        w.record_input(f, &cfg.out.join(f))?;
    }

    let groups = g
        .groups
        .iter()
        .map(|r| {
            let ds: Vec<(f64, f64)> = ks
                .cells
                .iter()
                .filter(|c| c.group_a == r.country || c.group_b == r.country)
                .filter_map(|c| Some((c.d?, c.p?)))
                .collect();
            let max_d = ds.iter().map(|x| x.0).fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))));
            GroupReport {
                country: r.country.clone(),
                n: r.n,
                mode: r.mode.clone(),
                gpdi: r.gpdi,
                median_ln: r.median_ln,
                ci95_halfwidth: r.ci95_halfwidth,
                error: r.error.clone(),
                country_cluster: cl.countries.as_ref().and_then(|c| c.assignment.get(&r.country).copied()),
                ks: KsSummary {
                    tests: ds.len(),
                    mean_d: (!ds.is_empty()).then(|| ds.iter().map(|x| x.0).sum::<f64>() / ds.len() as f64),
                    max_d,
                    significant_05: ds.iter().filter(|x| x.1 < 0.05).count(),
                },
            }
        })
        .collect();

    let models = rg
        .ladder
        .models
        .into_iter()
        .map(|m| ModelReport {
            model: m.model,
            predictors: m.predictors,
            n: m.report.as_ref().map(|r| r.n),
            r2: m.report.as_ref().map(|r| r.r2),
            adj_r2: m.report.as_ref().map(|r| r.adj_r2),
            stars: m.report.as_ref().map_or("", |r| stars(r.f_p_value)).to_string(),
            error: m.error,
        })
        .collect();

    let report = Report {
        engine: "gpdi",
        version: gpdi_core::VERSION,
        seed: cfg.seed,
        groups,
        excluded: g.exclusions,
        ks: KsReport {
            per_group_cap: ks.per_group_cap,
            tests: ks.cells.len(),
            failed: ks.cells.iter().filter(|c| c.error.is_some()).count(),
        },
        clustering: ClusteringReport {
            linkage: cl.linkage,
            metric: cl.metric,
            country_k: cl.countries.as_ref().map(|c| c.k),
            in_country: InCountry {
                country: cl.individuals.country,
                sampled: cl.individuals.sampled,
                chosen_k: cl.individuals.chosen_k,
                silhouette: cl.individuals.silhouette,
            },
        },
        regression: RegressionReport {
            response: rg.response,
            rows: rg.ladder.rows.len(),
            models,
            delta_adj_r2: rg.comparison.and_then(|c| c.delta_adj_r2),
        },
    };
    w.counts.insert("groups".into(), report.groups.len() as u64);
    w.write_json("report.json", &report)?;
    w.write("report.schema.json", SCHEMA.as_bytes())?;
    w.finish()
}
