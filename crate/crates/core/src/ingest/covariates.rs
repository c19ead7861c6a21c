use std::collections::BTreeMap;
use std::io::Read;

use super::normalize_group_code;
use crate::error::{Error, Result};

/// Group-level covariates keyed by group code. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CovariateTable {
    columns: Vec<String>,
    rows: BTreeMap<String, Vec<Option<f64>>>,
}

impl CovariateTable {
    pub fn new(columns: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::MalformedCovariates(format!("duplicate column {c}")));
            }
        }
        Ok(CovariateTable { columns, rows: BTreeMap::new() })
    }

    pub fn insert_row(&mut self, code: &str, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::MalformedCovariates(format!(
                "row {code} has {} values for {} columns",
                values.len(),
                self.columns.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::MalformedCovariates(format!("row {code} has a non-finite value")));
        }
        if self.rows.insert(code.to_string(), values).is_some() {
            return Err(Error::MalformedCovariates(format!("duplicate group code {code}")));
        }
        Ok(())
    }

    /// Adds (or replaces) a column from a code-keyed map; absent codes become missing.
    pub fn set_column(&mut self, name: &str, values: &BTreeMap<String, f64>) -> Result<()> {
        if values.values().any(|v| !v.is_finite()) {
            return Err(Error::MalformedCovariates(format!("column {name} has a non-finite value")));
        }
        let idx = match self.column_index(name) {
            Some(i) => i,
            None => {
                self.columns.push(name.to_string());
                for row in self.rows.values_mut() {
                    row.push(None);
                }
                self.columns.len() - 1
            }
        };
        for (code, row) in self.rows.iter_mut() {
            row[idx] = values.get(code).copied();
        }
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn value(&self, code: &str, column: &str) -> Option<f64> {
        let idx = self.column_index(column)?;
        self.rows.get(code)?.get(idx).copied().flatten()
    }

    /// Rows (in code order) that have every listed column present, as
    /// `(codes, matrix)` with one inner vector per row.
    pub fn complete_cases(&self, names: &[&str]) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown covariate column {n}")))
            })
            .collect::<Result<_>>()?;
        let mut codes = Vec::new();
        let mut rows = Vec::new();
        for (code, row) in &self.rows {
            let vals: Option<Vec<f64>> = idx.iter().map(|&i| row[i]).collect();
            if let Some(vals) = vals {
                codes.push(code.clone());
                rows.push(vals);
            }
        }
        Ok((codes, rows))
    }
}

fn parse_cell(s: &str) -> std::result::Result<Option<f64>, String> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s == ".." {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| format!("bad number {s:?}"))?;
    if !v.is_finite() {
        return Err(format!("non-finite value {s:?}"));
    }
    Ok(Some(v))
}

/// Reads `country,<named columns...>`. Empty, `NA` and `..` cells are missing.
pub fn read_covariates<R: Read>(reader: R) -> Result<CovariateTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::MalformedCovariates(e.to_string()))?.clone();
    let names: Vec<String> = headers.iter().map(|s| s.trim().to_string()).collect();
    if names.first().map(String::as_str) != Some("country") || names.len() < 2 {
        return Err(Error::MalformedCovariates("header must start with country and name at least one column".into()));
    }
    let mut table = CovariateTable::new(names[1..].to_vec())?;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::MalformedCovariates(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let code = normalize_group_code(rec.get(0).unwrap_or(""))
            .map_err(|e| Error::MalformedCovariates(format!("line {line}: {e}")))?;
        let values = rec
            .iter()
            .skip(1)
            .map(parse_cell)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::MalformedCovariates(format!("line {line}: {e}")))?;
        table.insert_row(&code, values)?;
    }
    Ok(table)
}
