use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use gpdi_core::ingest::{read_covariates, CovariateTable};
use gpdi_core::regression::{compare_models, factor_ladder, ladder_csv, model_ladder, poly_fit, Ladder, ModelComparison, PolyFit};
use gpdi_core::stats::pearson;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{read_json, StageWriter};
use crate::stages::gpdi::GpdiOutput;

#[derive(Debug, Serialize)]
struct PolyResult {
    fit: Option<PolyFit>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct PearsonRow {
    column: String,
    r: Option<f64>,
    n: usize,
    p_value: Option<f64>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct RegressOutput {
    seed: u64,
    response: String,
    gpdi_column: String,
    ladder: Ladder,
    comparison: Option<ModelComparison>,
    linear: PolyResult,
    parabolic: PolyResult,
    pearson: Vec<PearsonRow>,
}

fn tagged(e: &gpdi_core::Error) -> String {
    format!("{}: {e}", e.code())
}

fn relabel(ladder: &mut Ladder, labels: &BTreeMap<String, String>) {
    let name = |s: &str| labels.get(s).cloned().unwrap_or_else(|| s.to_string());
    let response = name(&ladder.response);
    for m in &mut ladder.models {
        let preds: Vec<String> = m.predictors.iter().map(|p| name(p)).collect();
        m.model = format!("{response} ~ {}", preds.join(" + "));
    }
}

fn pair_columns(table: &CovariateTable, a: &str, b: &str) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let (_, rows) = table.complete_cases(&[a, b])?;
    Ok(rows.into_iter().map(|r| (r[0], r[1])).unzip())
}

pub fn run(cfg: &RunConfig) -> CliResult<PathBuf> {
    let rc = &cfg.regress;
    let cov_path = cfg.covariates.as_ref().ok_or_else(|| CliError::Config("regress needs --covariates".into()))?;
    let response = rc.response.clone().ok_or_else(|| CliError::Config("regress needs a response column".into()))?;
    let sets = if rc.models.is_empty() { factor_ladder(&rc.factors) } else { rc.models.clone() };
    if sets.is_empty() {
        return Err(CliError::Config("regress needs factors or explicit models".into()));
    }
    let g: GpdiOutput = read_json(&cfg.out, "gpdi/gpdi.json")?;

    let mut w = StageWriter::begin(cfg, "regress")?;
    w.record_input("covariates", cov_path)?;
    w.record_input("gpdi.json", &cfg.out.join("gpdi/gpdi.json"))?;
    let file = File::open(cov_path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", cov_path.display())))?;
    let mut table = read_covariates(BufReader::new(file))?;
    let index: BTreeMap<String, f64> = g.groups.iter().filter_map(|r| Some((r.country.clone(), r.gpdi?))).collect();
    table.set_column(&rc.gpdi_column, &index)?;

    let mut ladder = model_ladder(&table, &response, &sets, rc.standardize)?;
    relabel(&mut ladder, &rc.labels);
    w.write("ladder.csv", ladder_csv(&ladder)?.as_bytes())?;

    let comparison = if rc.null.is_empty() {
        None
    } else {
        let added = if rc.added.is_empty() { vec![rc.gpdi_column.clone()] } else { rc.added.clone() };
        let mut c = compare_models(&table, &response, &rc.null, &added, rc.standardize)?;
        let mut pair = Ladder { response: response.clone(), rows: vec![], models: vec![c.null, c.augmented] };
        relabel(&mut pair, &rc.labels);
        c.augmented = pair.models.pop().unwrap();
        c.null = pair.models.pop().unwrap();
        Some(c)
    };

    let (x, y) = pair_columns(&table, &rc.gpdi_column, &response)?;
    let fit = |degree| match poly_fit(&x, &y, degree) {
        Ok(f) => PolyResult { fit: Some(f), error: None },
        Err(e) => PolyResult { fit: None, error: Some(tagged(&e)) },
    };
    let (linear, parabolic) = (fit(1), fit(2));

    let mut correlations = Vec::new();
    for col in table.columns().to_vec() {
        if col == rc.gpdi_column {
            continue;
        }
        let (a, b) = pair_columns(&table, &rc.gpdi_column, &col)?;
        correlations.push(match pearson(&a, &b) {
            Ok(c) => PearsonRow { column: col, r: Some(c.r), n: c.n, p_value: Some(c.p_value), error: None },
            Err(e) => PearsonRow { column: col, r: None, n: a.len(), p_value: None, error: Some(tagged(&e)) },
        });
    }

    w.counts.insert("covariate_rows".into(), table.len() as u64);
    w.counts.insert("ladder_rows".into(), ladder.rows.len() as u64);
    w.counts.insert("models".into(), ladder.models.len() as u64);
    w.counts.insert("models_failed".into(), ladder.models.iter().filter(|m| m.error.is_some()).count() as u64);
    let out = RegressOutput {
        seed: cfg.seed,
        response,
        gpdi_column: rc.gpdi_column.clone(),
        ladder,
        comparison,
        linear,
        parabolic,
        pearson: correlations,
    };
    w.write_json("regression.json", &out)?;
    w.finish()
}
