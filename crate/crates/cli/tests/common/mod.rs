#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const STAGES: [&str; 5] = ["gpdi", "ks", "cluster", "regress", "report"];

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

pub fn gpdi(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gpdi"));
    cmd.args(args).env_remove("GPDI_THREADS");
    if let Some(t) = threads {
        cmd.env("GPDI_THREADS", t.to_string());
    }
    cmd.output().expect("spawn gpdi")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Runs one stage against the bundled fixture config and panics on failure.
pub fn stage(name: &str, out: &Path, threads: Option<usize>) {
    let cfg = fixture("config.toml");
    let o = gpdi(&[name, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], threads);
    assert!(o.status.success(), "{name} failed: {}", stderr(&o));
}

pub fn pipeline(out: &Path, threads: Option<usize>) {
    for s in STAGES {
        stage(s, out, threads);
    }
}

/// Every file under `dir` keyed by its relative path.
pub fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, acc);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                acc.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(dir, dir, &mut acc);
    acc
}

/// Parsed CSV: header and rows of string cells.
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// Writes a scored CSV with the given group sizes, deterministic members.
pub fn write_scored(path: &Path, groups: &[(&str, usize)], seed: u64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from("respondent_id,country,age,sex");
    for f in 1..=30 {
        text += &format!(",f{f:02}");
    }
    text.push('\n');
    let mut id = 0;
    for (code, n) in groups {
        let centre: Vec<f64> = (0..30).map(|_| rng.gen_range(25.0..35.0)).collect();
        for _ in 0..*n {
            id += 1;
            text += &format!("r{id},{code},,");
            for c in &centre {
                text += &format!(",{:.2}", (c + rng.gen_range(-6.0..6.0)).clamp(10.0, 50.0));
            }
            text.push('\n');
        }
    }
    std::fs::write(path, text).unwrap();
}
