//! Run configuration: built-in defaults, then an optional TOML file, then flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use gpdi_core::clustering::{Linkage, Metric};
use gpdi_core::ingest::{CenteringMode, ItemCoding, DEFAULT_MIN_GROUP_SIZE};
use gpdi_core::similarity::{DEFAULT_EXACT_CAP, DEFAULT_PAIR_BUDGET, MIN_PAIR_BUDGET};
use gpdi_core::stats::DEFAULT_KS_CAP;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SUBSAMPLE: f64 = 0.1;
pub const DEFAULT_COUNTRY_K: usize = 3;

#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Raw item responses (respondent_id,country,age,sex,i001..i300).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Pre-scored facet vectors (respondent_id,country,age,sex,f01..f30).
    #[arg(long)]
    pub scored: Option<PathBuf>,
    /// Item keying table (item_index,facet_index,reverse).
    #[arg(long)]
    pub keying: Option<PathBuf>,
    /// Country covariates (country,<columns...>).
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// Item response scale, e.g. 1-5.
    #[arg(long)]
    pub coding: Option<String>,
    /// none | global-mean | global-zscore | group-mean
    #[arg(long)]
    pub centering: Option<String>,
    #[arg(long)]
    pub min_group_size: Option<usize>,
    /// Largest pair count handled in exact mode.
    #[arg(long)]
    pub exact_cap: Option<u64>,
    #[arg(long)]
    pub pair_budget: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-group sample cap for KS tests.
    #[arg(long)]
    pub ks_cap: Option<usize>,
    /// ward | average | complete
    #[arg(long)]
    pub linkage: Option<String>,
    /// euclidean | cosine_distance
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub k_candidates: Option<Vec<usize>>,
    /// Fraction of the clustered country's members used for in-country clustering.
    #[arg(long)]
    pub subsample: Option<f64>,
    /// Country for in-country clustering (default: the largest panel).
    #[arg(long)]
    pub country: Option<String>,
    /// Number of clusters cut from the cross-country tree.
    #[arg(long)]
    pub country_k: Option<usize>,
    /// Regression response column.
    #[arg(long)]
    pub response: Option<String>,
    /// Regression factors; every non-empty subset becomes a ladder model.
    #[arg(long, value_delimiter = ',')]
    pub factors: Option<Vec<String>>,
    #[arg(long, env = "GPDI_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record wall-clock stage timings in manifests (makes them non-reproducible).
    #[arg(long)]
    pub record_timings: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    input: Option<PathBuf>,
    scored: Option<PathBuf>,
    keying: Option<PathBuf>,
    covariates: Option<PathBuf>,
    coding: Option<String>,
    centering: Option<String>,
    min_group_size: Option<usize>,
    exact_cap: Option<u64>,
    pair_budget: Option<u64>,
    seed: Option<u64>,
    ks_cap: Option<usize>,
    linkage: Option<String>,
    metric: Option<String>,
    k_candidates: Option<Vec<usize>>,
    subsample: Option<f64>,
    country: Option<String>,
    country_k: Option<usize>,
    threads: Option<usize>,
    out: Option<PathBuf>,
    #[serde(default)]
    regress: RegressFile,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegressFile {
    response: Option<String>,
    factors: Option<Vec<String>>,
    models: Option<Vec<Vec<String>>>,
    null: Option<Vec<String>>,
    added: Option<Vec<String>>,
    standardize: Option<bool>,
    gpdi_column: Option<String>,
    labels: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressConfig {
    pub response: Option<String>,
    pub factors: Vec<String>,
    pub models: Vec<Vec<String>>,
    pub null: Vec<String>,
    pub added: Vec<String>,
    pub standardize: bool,
    /// Covariate column that receives the per-country index.
    pub gpdi_column: String,
    /// Display names used in model labels.
    pub labels: BTreeMap<String, String>,
}

/// Fully resolved settings. Serialises to the config echo written into
/// manifests; paths, output directory and thread count are left out so the
/// echo depends only on what affects results.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    #[serde(skip)]
    pub input: Option<PathBuf>,
    #[serde(skip)]
    pub scored: Option<PathBuf>,
    #[serde(skip)]
    pub keying: Option<PathBuf>,
    #[serde(skip)]
    pub covariates: Option<PathBuf>,
    pub coding: String,
    #[serde(skip)]
    pub item_coding: ItemCoding,
    pub centering: CenteringMode,
    pub min_group_size: usize,
    pub exact_cap: u64,
    pub pair_budget: u64,
    pub seed: u64,
    pub ks_cap: usize,
    pub linkage: Linkage,
    pub metric: Metric,
    pub k_candidates: Vec<usize>,
    pub subsample: f64,
    pub country: Option<String>,
    pub country_k: usize,
    pub regress: RegressConfig,
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub record_timings: bool,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn load_file(path: &Path) -> CliResult<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg: FileConfig = toml::from_str(&text).map_err(|e| bad(format!("config {}: {e}", path.display())))?;
    // relative paths in a config file are relative to the file itself
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut cfg.input, &mut cfg.scored, &mut cfg.keying, &mut cfg.covariates, &mut cfg.out].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> CliResult<Self> {
        let file = match &flags.config {
            Some(p) => load_file(p)?,
            None => FileConfig::default(),
        };
        let pick = |f: &Option<PathBuf>, c: Option<PathBuf>| f.clone().or(c);
        let coding = flags.coding.clone().or(file.coding).unwrap_or_else(|| ItemCoding::default().to_string());
        let item_coding: ItemCoding = coding.parse().map_err(|e: gpdi_core::Error| bad(e.to_string()))?;
        let centering = match flags.centering.clone().or(file.centering) {
            Some(s) => s.parse().map_err(|e: gpdi_core::Error| bad(e.to_string()))?,
            None => CenteringMode::default(),
        };
        let linkage = match flags.linkage.clone().or(file.linkage) {
            Some(s) => s.parse().map_err(|e: gpdi_core::Error| bad(e.to_string()))?,
            None => Linkage::default(),
        };
        let metric = match flags.metric.clone().or(file.metric) {
            Some(s) => s.parse().map_err(|e: gpdi_core::Error| bad(e.to_string()))?,
            None => Metric::default(),
        };
        let mut k_candidates = flags.k_candidates.clone().or(file.k_candidates).unwrap_or_else(|| vec![8, 13]);
        k_candidates.sort_unstable();
        k_candidates.dedup();

        let r = file.regress;
        let regress = RegressConfig {
            response: flags.response.clone().or(r.response),
            factors: flags.factors.clone().or(r.factors).unwrap_or_default(),
            models: r.models.unwrap_or_default(),
            null: r.null.unwrap_or_default(),
            added: r.added.unwrap_or_default(),
            standardize: r.standardize.unwrap_or(true),
            gpdi_column: r.gpdi_column.unwrap_or_else(|| "gpdi".into()),
            labels: r.labels.unwrap_or_default(),
        };

        let cfg = RunConfig {
            input: pick(&flags.input, file.input),
            scored: pick(&flags.scored, file.scored),
            keying: pick(&flags.keying, file.keying),
            covariates: pick(&flags.covariates, file.covariates),
            coding: item_coding.to_string(),
            item_coding,
            centering,
            min_group_size: flags.min_group_size.or(file.min_group_size).unwrap_or(DEFAULT_MIN_GROUP_SIZE),
            exact_cap: flags.exact_cap.or(file.exact_cap).unwrap_or(DEFAULT_EXACT_CAP),
            pair_budget: flags.pair_budget.or(file.pair_budget).unwrap_or(DEFAULT_PAIR_BUDGET),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            ks_cap: flags.ks_cap.or(file.ks_cap).unwrap_or(DEFAULT_KS_CAP),
            linkage,
            metric,
            k_candidates,
            subsample: flags.subsample.or(file.subsample).unwrap_or(DEFAULT_SUBSAMPLE),
            country: flags.country.clone().or(file.country).map(|c| c.trim().to_ascii_uppercase()),
            country_k: flags.country_k.or(file.country_k).unwrap_or(DEFAULT_COUNTRY_K),
            regress,
            threads: flags.threads.or(file.threads),
            out: pick(&flags.out, file.out).unwrap_or_else(|| PathBuf::from("gpdi-out")),
            record_timings: flags.record_timings,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        if self.input.is_some() && self.scored.is_some() {
            return Err(bad("give either --input or --scored, not both"));
        }
        if self.keying.is_some() && self.input.is_none() {
            return Err(bad("--keying only applies to raw --input"));
        }
        for (flag, path) in [
            ("--input", &self.input),
            ("--scored", &self.scored),
            ("--keying", &self.keying),
            ("--covariates", &self.covariates),
        ] {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(bad(format!("{flag}: no such file {}", p.display())));
                }
            }
        }
        if self.min_group_size < 2 {
            return Err(bad("--min-group-size must be at least 2"));
        }
        if self.exact_cap == 0 {
            return Err(bad("--exact-cap must be positive"));
        }
        if self.pair_budget < MIN_PAIR_BUDGET {
            return Err(bad(format!("--pair-budget must be at least {MIN_PAIR_BUDGET}")));
        }
        if self.ks_cap < 2 {
            return Err(bad("--ks-cap must be at least 2"));
        }
        if self.linkage == Linkage::Ward && self.metric != Metric::Euclidean {
            return Err(bad("METRIC_LINKAGE_MISMATCH: ward linkage requires the euclidean metric"));
        }
        if self.k_candidates.is_empty() || self.k_candidates.iter().any(|&k| k < 2) {
            return Err(bad("--k-candidates must be a non-empty list of integers >= 2"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(bad("--subsample must lie in (0, 1]"));
        }
        if self.country_k < 1 {
            return Err(bad("--country-k must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(bad("--threads must be at least 1"));
        }
        if self.regress.factors.len() > 6 {
            return Err(bad("at most 6 regression factors (63 ladder models)"));
        }
        Ok(())
    }

    /// The panel source, required by stages that read individual records.
    pub fn require_panel_input(&self) -> CliResult<()> {
        if self.input.is_none() && self.scored.is_none() {
            return Err(bad("this command needs --input or --scored"));
        }
        Ok(())
    }

    pub fn digest_config(&self) -> gpdi_core::similarity::DigestConfig {
        gpdi_core::similarity::DigestConfig { exact_cap: self.exact_cap, pair_budget: self.pair_budget, seed: self.seed }
    }
}
