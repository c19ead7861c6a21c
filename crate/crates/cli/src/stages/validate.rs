use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use gpdi_core::ingest::read_covariates;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{sha256_hex, ManifestFiles, MANIFEST};
use crate::panels::load_panels;

pub const STAGES: [&str; 5] = ["gpdi", "ks", "cluster", "regress", "report"];

#[derive(Debug, Serialize)]
pub struct InputSummary {
    pub records_read: usize,
    pub records_rejected: usize,
    pub groups: usize,
    pub members: usize,
    pub groups_excluded: usize,
}

#[derive(Debug, Serialize)]
pub struct StageCheck {
    pub stage: String,
    pub files: usize,
}

#[derive(Debug, Serialize)]
pub struct Validation {
    pub inputs: Option<InputSummary>,
    pub covariate_rows: Option<usize>,
    pub stages: Vec<StageCheck>,
}

fn walk(root: &Path, dir: &Path, acc: &mut BTreeSet<String>) -> CliResult<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            walk(root, &path, acc)?;
        } else {
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            acc.insert(rel);
        }
    }
    Ok(())
}

fn mismatch(msg: String) -> CliError {
    CliError::data("MANIFEST_MISMATCH", msg)
}

/// Checks one stage directory against its manifest.
pub fn verify_stage(dir: &Path) -> CliResult<usize> {
    let bytes = fs::read(dir.join(MANIFEST)).map_err(|_| CliError::MissingStage(dir.join(MANIFEST)))?;
    let manifest: ManifestFiles = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::data("MALFORMED_STAGE_OUTPUT", format!("{}: {e}", dir.join(MANIFEST).display())))?;
    let mut present = BTreeSet::new();
    walk(dir, dir, &mut present)?;
    present.remove(MANIFEST);
    for f in &manifest.files {
        if !present.remove(&f.path) {
            return Err(mismatch(format!("{}: listed file {} is missing", manifest.stage, f.path)));
        }
        let data = fs::read(dir.join(&f.path))?;
        if sha256_hex(&data) != f.sha256 || data.len() as u64 != f.bytes {
            return Err(mismatch(format!("{}: {} does not match its recorded hash", manifest.stage, f.path)));
        }
    }
    if let Some(extra) = present.into_iter().next() {
        return Err(mismatch(format!("{}: {} is not listed in the manifest", manifest.stage, extra)));
    }
    Ok(manifest.files.len())
}

pub fn run(cfg: &RunConfig) -> CliResult<Validation> {
    let inputs = if cfg.input.is_some() || cfg.scored.is_some() {
        let loaded = load_panels(cfg, None)?;
        Some(InputSummary {
            records_read: loaded.records_read,
            records_rejected: loaded.rejects.len(),
            groups: loaded.panels.panels.len(),
            members: loaded.panels.member_count(),
            groups_excluded: loaded.panels.exclusions.len(),
        })
    } else {
        None
    };
    let covariate_rows = match &cfg.covariates {
        Some(p) => Some(read_covariates(fs::File::open(p)?)?.len()),
        None => None,
    };
    let mut stages = Vec::new();
    for s in STAGES {
        let dir = cfg.out.join(s);
        if dir.is_dir() {
            stages.push(StageCheck { stage: s.to_string(), files: verify_stage(&dir)? });
        }
    }
    Ok(Validation { inputs, covariate_rows, stages })
}
