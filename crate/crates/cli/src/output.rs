//! Stage directories, staged atomically, each closed by a hashed manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputEcho {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub engine: &'static str,
    pub version: &'static str,
    pub stage: &'static str,
    pub seed: u64,
    pub config: &'a RunConfig,
    pub inputs: BTreeMap<String, InputEcho>,
    pub counts: BTreeMap<String, u64>,
    /// Digest mode per group, where the stage computes digests.
    pub groups: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, u64>>,
    pub files: Vec<FileEntry>,
}

/// Only what `validate` needs to check a manifest.
#[derive(Debug, Deserialize)]
pub struct ManifestFiles {
    pub stage: String,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn echo_input(path: &Path) -> CliResult<InputEcho> {
    let bytes = fs::read(path)?;
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(InputEcho { file, sha256: sha256_hex(&bytes) })
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> CliResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Writes a stage into `<out>/.<stage>.partial` and renames it to
/// `<out>/<stage>` on [`StageWriter::finish`]. Dropping an unfinished writer
/// deletes the partial directory.
pub struct StageWriter<'a> {
    stage: &'static str,
    config: &'a RunConfig,
    staging: PathBuf,
    target: PathBuf,
    files: Vec<FileEntry>,
    pub inputs: BTreeMap<String, InputEcho>,
    pub counts: BTreeMap<String, u64>,
    pub groups: BTreeMap<String, String>,
    timings: BTreeMap<String, u64>,
    finished: bool,
}

impl<'a> StageWriter<'a> {
    pub fn begin(config: &'a RunConfig, stage: &'static str) -> CliResult<Self> {
        fs::create_dir_all(&config.out)?;
        let staging = config.out.join(format!(".{stage}.partial"));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        Ok(StageWriter {
            stage,
            config,
            staging,
            target: config.out.join(stage),
            files: Vec::new(),
            inputs: BTreeMap::new(),
            counts: BTreeMap::new(),
            groups: BTreeMap::new(),
            timings: BTreeMap::new(),
            finished: false,
        })
    }

    pub fn record_input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        self.inputs.insert(role.to_string(), echo_input(path)?);
        Ok(())
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.staging.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.push(FileEntry { path: rel.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let bytes = json_bytes(value)?;
        self.write(rel, &bytes)
    }

    /// Records the time elapsed since `since` under `label`.
    pub fn mark(&mut self, label: &str, since: Instant) {
        self.timings.insert(label.to_string(), since.elapsed().as_millis() as u64);
    }

    pub fn finish(mut self) -> CliResult<PathBuf> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            engine: "gpdi",
            version: gpdi_core::VERSION,
            stage: self.stage,
            seed: self.config.seed,
            config: self.config,
            inputs: std::mem::take(&mut self.inputs),
            counts: std::mem::take(&mut self.counts),
            groups: std::mem::take(&mut self.groups),
            timings_ms: self.config.record_timings.then(|| std::mem::take(&mut self.timings)),
            files: std::mem::take(&mut self.files),
        };
        fs::write(self.staging.join(MANIFEST), json_bytes(&manifest)?)?;
        if self.target.exists() {
            fs::remove_dir_all(&self.target)?;
        }
        fs::rename(&self.staging, &self.target)?;
        self.finished = true;
        Ok(self.target.clone())
    }
}

impl Drop for StageWriter<'_> {
    fn drop(&mut self) {
        if !self.finished {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

/// Path of a prior stage's output, or exit-4 error naming it.
pub fn require(out: &Path, rel: &str) -> CliResult<PathBuf> {
    let p = out.join(rel);
    if p.is_file() {
        Ok(p)
    } else {
        Err(CliError::MissingStage(p))
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(out: &Path, rel: &str) -> CliResult<T> {
    let p = require(out, rel)?;
    let bytes = fs::read(&p)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::data("MALFORMED_STAGE_OUTPUT", format!("{}: {e}", p.display())))
}

pub fn f64_le_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn f64_le_values(bytes: &[u8]) -> CliResult<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(CliError::data("MALFORMED_STAGE_OUTPUT", "sample file length is not a multiple of 8"));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> CliResult<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
