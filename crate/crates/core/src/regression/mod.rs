//! Standardised OLS with classical inference, VIF diagnostics, model ladders
//! and low-degree polynomial fits.
//!
//! Predictor names may carry a power suffix (`gpdi^2`), which resolves to the
//! base column raised to that power before any standardisation.

mod qr;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::ingest::CovariateTable;
use crate::stats::t_two_sided;
use qr::least_squares;

pub const INTERCEPT: &str = "(intercept)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnScaling {
    pub column: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardization {
    /// Always "population": sd divides by n.
    pub convention: &'static str,
    pub columns: Vec<ColumnScaling>,
}

/// Centres a column and divides by its population standard deviation.
pub fn standardize(name: &str, values: &[f64]) -> Result<(Vec<f64>, ColumnScaling)> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    if values.is_empty() || !sd.is_finite() || sd < 1e-12 {
        return Err(Error::DegenerateVariance(name.to_string()));
    }
    let z = values.iter().map(|v| (v - mean) / sd).collect();
    Ok((z, ColumnScaling { column: name.to_string(), mean, sd }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignSpec {
    pub response: String,
    pub predictors: Vec<String>,
    pub standardize: bool,
}

impl DesignSpec {
    pub fn new(response: impl Into<String>, predictors: Vec<String>) -> Self {
        DesignSpec { response: response.into(), predictors, standardize: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.predictors.is_empty() {
            return Err(Error::InvalidArgument("a model needs at least one predictor".into()));
        }
        let mut seen = BTreeSet::new();
        for p in &self.predictors {
            let (base, _) = parse_term(p)?;
            if base == self.response {
                return Err(Error::InvalidArgument(format!("response `{}` used as a predictor", self.response)));
            }
            if !seen.insert(p.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate predictor `{p}`")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("{} ~ {}", self.response, self.predictors.join(" + "))
    }
}

fn parse_term(term: &str) -> Result<(&str, i32)> {
    match term.rsplit_once('^') {
        None => Ok((term, 1)),
        Some((base, power)) => match power.trim().parse::<i32>() {
            Ok(k) if k >= 1 => Ok((base.trim(), k)),
            _ => Err(Error::InvalidArgument(format!("bad power in term `{term}`"))),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VifEntry {
    pub predictor: String,
    pub vif: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionReport {
    pub response: String,
    pub predictors: Vec<String>,
    pub n: usize,
    /// Intercept first.
    pub coefficients: Vec<Coefficient>,
    pub r2: f64,
    pub adj_r2: f64,
    pub residual_variance: f64,
    pub f_statistic: f64,
    pub f_p_value: f64,
    pub vif: Vec<VifEntry>,
    pub standardization: Option<Standardization>,
    pub rows: Vec<String>,
    #[serde(skip)]
    pub fitted: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

fn r_squared(y: &[f64], fitted: &[f64], name: &str) -> Result<(f64, f64)> {
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    let ssr: f64 = y.iter().zip(fitted).map(|(v, f)| (v - f) * (v - f)).sum();
    if sst <= 0.0 {
        return Err(Error::DegenerateVariance(name.to_string()));
    }
    Ok(((1.0 - ssr / sst).clamp(0.0, 1.0), ssr))
}

fn with_intercept(columns: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    std::iter::once(vec![1.0; n]).chain(columns.iter().cloned()).collect()
}

fn vif_columns(names: &[String], columns: &[Vec<f64>]) -> Result<Vec<f64>> {
    if columns.len() < 2 {
        return Ok(vec![1.0; columns.len()]);
    }
    let n = columns[0].len();
    (0..columns.len())
        .map(|i| {
            let others: Vec<Vec<f64>> =
                columns.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, c)| c.clone()).collect();
            let collinear = || Error::PerfectCollinearity(names[i].clone());
            let ls = least_squares(&with_intercept(&others, n), &columns[i]).map_err(|_| collinear())?;
            let (r2, _) = r_squared(&columns[i], &ls.fitted, &names[i])?;
            if r2 > 1.0 - 1e-12 {
                return Err(collinear());
            }
            Ok(1.0 / (1.0 - r2))
        })
        .collect()
}

/// Fits `y` on the given row-major predictor matrix with an intercept.
pub fn fit_rows(
    response: &str,
    names: &[String],
    x: &[Vec<f64>],
    y: &[f64],
    standardize_predictors: bool,
    rows: Vec<String>,
) -> Result<RegressionReport> {
    let p = names.len();
    let n = y.len();
    if p == 0 {
        return Err(Error::InvalidArgument("a model needs at least one predictor".into()));
    }
    if x.len() != n || x.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidArgument("design rows do not match the response".into()));
    }
    if n < p + 2 {
        return Err(Error::InsufficientRows { needed: p + 2, got: n });
    }
    let mut columns: Vec<Vec<f64>> = (0..p).map(|j| x.iter().map(|r| r[j]).collect()).collect();
    let standardization = if standardize_predictors {
        let mut scales = Vec::with_capacity(p);
        for (col, name) in columns.iter_mut().zip(names) {
            let (z, s) = standardize(name, col)?;
            *col = z;
            scales.push(s);
        }
        Some(Standardization { convention: "population", columns: scales })
    } else {
        None
    };

    let ls = least_squares(&with_intercept(&columns, n), y)?;
    let (r2, ssr) = r_squared(y, &ls.fitted, response)?;
    let dof = (n - p - 1) as f64;
    let adj_r2 = 1.0 - (1.0 - r2) * (n - 1) as f64 / dof;
    let residual_variance = ssr / dof;

    let coefficients = std::iter::once(INTERCEPT.to_string())
        .chain(names.iter().cloned())
        .zip(ls.beta.iter().zip(&ls.xtx_inv_diag))
        .map(|(name, (&estimate, &d))| {
            let std_error = (residual_variance * d).sqrt();
            let (t, p_value) = if std_error > 0.0 {
                let t = estimate / std_error;
                (t, t_two_sided(t, dof))
            } else if estimate == 0.0 {
                (0.0, 1.0)
            } else {
                (estimate.signum() * f64::INFINITY, 0.0)
            };
            Coefficient { name, estimate, std_error, t, p_value }
        })
        .collect();

    let (f_statistic, f_p_value) = if r2 >= 1.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = (r2 / p as f64) / ((1.0 - r2) / dof);
        let dist = FisherSnedecor::new(p as f64, dof).expect("positive degrees of freedom");
        (f, dist.sf(f).clamp(0.0, 1.0))
    };

    let vif = vif_columns(names, &columns)?
        .into_iter()
        .zip(names)
        .map(|(vif, predictor)| VifEntry { predictor: predictor.clone(), vif })
        .collect();
    let residuals = y.iter().zip(&ls.fitted).map(|(v, f)| v - f).collect();
    Ok(RegressionReport {
        response: response.to_string(),
        predictors: names.to_vec(),
        n,
        coefficients,
        r2,
        adj_r2,
        residual_variance,
        f_statistic,
        f_p_value,
        vif,
        standardization,
        rows,
        fitted: ls.fitted,
        residuals,
    })
}

/// Complete-case rows for `response` plus every base column behind `terms`.
/// Returns codes, the expanded predictor matrix, and the response.
fn gather(table: &CovariateTable, response: &str, terms: &[String]) -> Result<(Vec<String>, Vec<Vec<f64>>, Vec<f64>)> {
    let mut bases: Vec<&str> = vec![response];
    let mut parsed = Vec::with_capacity(terms.len());
    for t in terms {
        let (base, power) = parse_term(t)?;
        if !bases.contains(&base) {
            bases.push(base);
        }
        parsed.push((bases.iter().position(|b| *b == base).unwrap(), power));
    }
    let (codes, rows) = table.complete_cases(&bases)?;
    let x = rows.iter().map(|r| parsed.iter().map(|&(i, k)| r[i].powi(k)).collect()).collect();
    let y = rows.iter().map(|r| r[0]).collect();
    Ok((codes, x, y))
}

pub fn ols_fit(table: &CovariateTable, spec: &DesignSpec) -> Result<RegressionReport> {
    spec.validate()?;
    let (codes, x, y) = gather(table, &spec.response, &spec.predictors)?;
    fit_rows(&spec.response, &spec.predictors, &x, &y, spec.standardize, codes)
}

/// VIF of each predictor on the complete cases of `predictors`.
pub fn vif(table: &CovariateTable, predictors: &[String]) -> Result<Vec<VifEntry>> {
    if predictors.len() < 2 {
        return Err(Error::InvalidArgument("VIF needs at least two predictors".into()));
    }
    let (base, _) = parse_term(&predictors[0])?;
    let (_, x, _) = gather(table, base, &predictors[1..])?;
    let (_, first, _) = gather(table, base, &predictors[..1])?;
    let columns: Vec<Vec<f64>> = std::iter::once(first.iter().map(|r| r[0]).collect())
        .chain((0..predictors.len() - 1).map(|j| x.iter().map(|r| r[j]).collect()))
        .collect();
    Ok(vif_columns(predictors, &columns)?
        .into_iter()
        .zip(predictors)
        .map(|(vif, p)| VifEntry { predictor: p.clone(), vif })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderEntry {
    pub model: String,
    pub predictors: Vec<String>,
    pub report: Option<RegressionReport>,
    pub error: Option<String>,
}

impl LadderEntry {
    pub fn stars(&self) -> &'static str {
        self.report.as_ref().map_or("", |r| stars(r.f_p_value))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ladder {
    pub response: String,
    /// Complete-case rows shared by every model.
    pub rows: Vec<String>,
    pub models: Vec<LadderEntry>,
}

pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Fits each predictor set on one shared complete-case row set, so adjusted
/// R² values are comparable. A failing model is recorded, not fatal.
pub fn model_ladder(
    table: &CovariateTable,
    response: &str,
    factor_sets: &[Vec<String>],
    standardize_predictors: bool,
) -> Result<Ladder> {
    let mut union: Vec<String> = Vec::new();
    for set in factor_sets {
        DesignSpec::new(response, set.clone()).validate()?;
        for t in set {
            if !union.contains(t) {
                union.push(t.clone());
            }
        }
    }
    let (codes, x, y) = gather(table, response, &union)?;
    let models = factor_sets
        .par_iter()
        .map(|set| {
            let spec = DesignSpec::new(response, set.clone());
            let idx: Vec<usize> = set.iter().map(|t| union.iter().position(|u| u == t).unwrap()).collect();
            let sub: Vec<Vec<f64>> = x.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect();
            let fit = fit_rows(response, set, &sub, &y, standardize_predictors, codes.clone());
            let (report, error) = match fit {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(format!("{}: {e}", e.code()))),
            };
            LadderEntry { model: spec.label(), predictors: set.clone(), report, error }
        })
        .collect();
    Ok(Ladder { response: response.to_string(), rows: codes, models })
}

/// Every non-empty subset of `factors`, smaller subsets first and, within a
/// size, in factor order. Three factors give the seven-model ladder: each
/// alone, each pair, then all three.
pub fn factor_ladder(factors: &[String]) -> Vec<Vec<String>> {
    let p = factors.len();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    for size in 1..=p {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            sets.push(combo.clone());
            // advance to the next combination in lexicographic order
            let Some(i) = (0..size).rev().find(|&i| combo[i] < p - size + i) else { break };
            combo[i] += 1;
            for j in i + 1..size {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    sets.into_iter().map(|s| s.into_iter().map(|i| factors[i].clone()).collect()).collect()
}

pub fn three_factor_sets(factors: [&str; 3]) -> Vec<Vec<String>> {
    factor_ladder(&factors.map(str::to_string))
}

/// CSV with header `model,predictors,n,r2,adj_r2,stars`; failed models leave
/// the numeric cells empty.
/// Presentation table; R² columns are rounded to six decimals.
pub fn ladder_csv(ladder: &Ladder) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["model", "predictors", "n", "r2", "adj_r2", "stars"]).map_err(io)?;
    for m in &ladder.models {
        let preds = m.predictors.join("+");
        let row = match &m.report {
            Some(r) => [m.model.clone(), preds, r.n.to_string(), format!("{:.6}", r.r2), format!("{:.6}", r.adj_r2), m.stars().into()],
            None => [m.model.clone(), preds, String::new(), String::new(), String::new(), String::new()],
        };
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 csv"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelComparison {
    pub null: LadderEntry,
    pub augmented: LadderEntry,
    pub delta_adj_r2: Option<f64>,
    pub rows: Vec<String>,
}

/// Baseline model against the same model plus `added` predictors, on shared rows.
pub fn compare_models(
    table: &CovariateTable,
    response: &str,
    null: &[String],
    added: &[String],
    standardize_predictors: bool,
) -> Result<ModelComparison> {
    let mut augmented = null.to_vec();
    augmented.extend(added.iter().cloned());
    let ladder = model_ladder(table, response, &[null.to_vec(), augmented], standardize_predictors)?;
    let mut models = ladder.models.into_iter();
    let (null, augmented) = (models.next().unwrap(), models.next().unwrap());
    let delta_adj_r2 = match (&null.report, &augmented.report) {
        (Some(a), Some(b)) => Some(b.adj_r2 - a.adj_r2),
        _ => None,
    };
    Ok(ModelComparison { null, augmented, delta_adj_r2, rows: ladder.rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyFit {
    pub degree: usize,
    /// Constant term first.
    pub coefficients: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
    pub n: usize,
    /// Stationary point `-c1 / (2 c2)` of a quadratic.
    pub vertex: Option<f64>,
}

pub fn poly_fit(x: &[f64], y: &[f64], degree: usize) -> Result<PolyFit> {
    if !(1..=2).contains(&degree) {
        return Err(Error::InvalidArgument(format!("degree {degree} not supported")));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("x and y lengths differ".into()));
    }
    let n = x.len();
    if n < degree + 2 {
        return Err(Error::InsufficientRows { needed: degree + 2, got: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value".into()));
    }
    let columns: Vec<Vec<f64>> = (1..=degree as i32).map(|k| x.iter().map(|v| v.powi(k)).collect()).collect();
    let ls = least_squares(&with_intercept(&columns, n), y)?;
    let (r2, _) = r_squared(y, &ls.fitted, "y")?;
    let adj_r2 = 1.0 - (1.0 - r2) * (n - 1) as f64 / (n - degree - 1) as f64;
    let vertex = (degree == 2 && ls.beta[2] != 0.0).then(|| -ls.beta[1] / (2.0 * ls.beta[2]));
    Ok(PolyFit { degree, coefficients: ls.beta, r2, adj_r2, n, vertex })
}
