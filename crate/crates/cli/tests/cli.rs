mod common;

use std::fs;

use common::*;
use tempfile::tempdir;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn fixture_pipeline_matches_reference_outputs() {
    let dir = tempdir().unwrap();
    let out = dir.path();
    pipeline(out, None);

    // diversity index against the store-all reference
    let (h, rows) = read_csv(&out.join("gpdi/gpdi.csv"));
    let col = |name: &str| h.iter().position(|c| c == name).unwrap();
    let (_, want) = read_csv(&fixture("golden/gpdi_oracle.csv"));
    assert_eq!(rows.len(), want.len());
    let modes: Vec<&str> = rows.iter().map(|r| r[col("mode")].as_str()).collect();
    assert!(modes.contains(&"exact") && modes.contains(&"sampled"));
    for (got, w) in rows.iter().zip(&want) {
        assert_eq!(got[col("country")], w[0]);
        assert_eq!(got[col("n")], w[1]);
        assert_eq!(got[col("pairs_total")], w[2]);
        assert_eq!(got[col("seed")], "42");
        let g: f64 = got[col("gpdi")].parse().unwrap();
        let o: f64 = w[5].parse().unwrap();
        if got[col("mode")] == "exact" {
            assert_eq!(got[col("pairs_positive")], w[3]);
            assert!(close(g, o, 1e-12), "{}: {g} vs {o}", w[0]);
        } else {
            let hw: f64 = got[col("ci95_halfwidth")].parse().unwrap();
            assert!((g - o).abs() <= 3.0 * hw, "{}: {g} vs {o} (half-width {hw})", w[0]);
        }
    }

    // regression ladder, byte for byte
    assert_eq!(
        fs::read_to_string(out.join("regress/ladder.csv")).unwrap(),
        fs::read_to_string(fixture("golden/ladder.csv")).unwrap()
    );

    // cross-country tree heights and the three-cluster cut
    let merges = json(&out.join("cluster/countries_merges.json"));
    let (_, want) = read_csv(&fixture("golden/country_tree.csv"));
    let got = merges["merges"].as_array().unwrap();
    assert_eq!(got.len(), want.len());
    for (m, w) in got.iter().zip(&want) {
        assert!(close(m["height"].as_f64().unwrap(), w[1].parse().unwrap(), 1e-9));
        assert_eq!(m["size"].as_u64().unwrap().to_string(), w[2]);
    }
    let (_, got) = read_csv(&out.join("cluster/country_clusters.csv"));
    let (_, want) = read_csv(&fixture("golden/country_partition.csv"));
    let same = |a: &[Vec<String>]| -> Vec<Vec<bool>> {
        a.iter().map(|x| a.iter().map(|y| x[1] == y[1]).collect()).collect()
    };
    assert_eq!(got.iter().map(|r| &r[0]).collect::<Vec<_>>(), want.iter().map(|r| &r[0]).collect::<Vec<_>>());
    assert_eq!(same(&got), same(&want));
}

#[test]
fn report_validates_against_schema() {
    let dir = tempdir().unwrap();
    pipeline(dir.path(), None);
    let schema = json(&dir.path().join("report/report.schema.json"));
    let report = json(&dir.path().join("report/report.json"));
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&report).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:#?}");
    assert_eq!(report["seed"], 42);
    assert_eq!(report["groups"].as_array().unwrap().len(), 12);
    assert_eq!(report["regression"]["models"].as_array().unwrap().len(), 7);
}

#[test]
fn manifests_cover_and_hash_every_file() {
    let dir = tempdir().unwrap();
    let out = dir.path();
    pipeline(out, None);
    for s in STAGES {
        let m = json(&out.join(s).join("manifest.json"));
        assert_eq!(m["seed"], 42);
        assert_eq!(m["stage"], s);
        let listed: Vec<String> = m["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap().into()).collect();
        let mut present: Vec<String> = tree(&out.join(s)).into_keys().filter(|p| p != "manifest.json").collect();
        present.sort();
        assert_eq!(listed, present, "{s}");
        for f in m["files"].as_array().unwrap() {
            let bytes = fs::read(out.join(s).join(f["path"].as_str().unwrap())).unwrap();
            use sha2::Digest;
            assert_eq!(hex::encode(sha2::Sha256::digest(&bytes)), f["sha256"].as_str().unwrap());
        }
    }
    let gm = json(&out.join("gpdi/manifest.json"));
    assert_eq!(gm["groups"]["US"], "sampled");
    assert_eq!(gm["groups"]["DE"], "exact");
    assert_eq!(gm["counts"]["records_rejected"], 3);
    assert_eq!(gm["inputs"]["scored"]["file"], "scored.csv");
    assert!(gm.get("timings_ms").is_none());

    let cfg = fixture("config.toml");
    let args = ["validate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let o = gpdi(&args, None);
    assert!(o.status.success(), "{}", stderr(&o));

    // tampering is caught
    let csv = out.join("ks/ks_matrix.csv");
    let mut text = fs::read_to_string(&csv).unwrap();
    text.push('\n');
    fs::write(&csv, text).unwrap();
    let o = gpdi(&args, None);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("MANIFEST_MISMATCH") && stderr(&o).contains("ks_matrix.csv"));

    // and so is a stray file
    fs::remove_dir_all(out.join("ks")).unwrap();
    stage("ks", out, None);
    fs::write(out.join("cluster/extra.txt"), "x").unwrap();
    let o = gpdi(&args, None);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("extra.txt"));
}

#[test]
fn timings_are_opt_in() {
    let dir = tempdir().unwrap();
    let cfg = fixture("config.toml");
    let o = gpdi(
        &["gpdi", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--record-timings"],
        None,
    );
    assert!(o.status.success());
    let m = json(&dir.path().join("gpdi/manifest.json"));
    assert!(m["timings_ms"]["ingest"].is_u64());
    assert!(m["timings_ms"]["digest:US"].is_u64());
}

#[test]
fn two_raw_item_countries_give_two_rows_and_stable_bytes() {
    let dir = tempdir().unwrap();
    let run = |out: &str| {
        let o = gpdi(
            &[
                "gpdi",
                "--input",
                fixture("items.csv").to_str().unwrap(),
                "--keying",
                fixture("keying.csv").to_str().unwrap(),
                "--out",
                dir.path().join(out).to_str().unwrap(),
            ],
            None,
        );
        assert!(o.status.success(), "{}", stderr(&o));
        tree(&dir.path().join(out).join("gpdi"))
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    let (_, rows) = read_csv(&dir.path().join("a/gpdi/gpdi.csv"));
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["AA", "BB"]);
    let m = json(&dir.path().join("a/gpdi/manifest.json"));
    assert_eq!(m["inputs"]["keying"]["file"], "keying.csv");
}

#[test]
fn below_threshold_only_is_empty_analysis() {
    let dir = tempdir().unwrap();
    let scored = dir.path().join("small.csv");
    write_scored(&scored, &[("AA", 10), ("BB", 35)], 1);
    let out = dir.path().join("out");
    let o = gpdi(&["gpdi", "--scored", scored.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("EMPTY_ANALYSIS"));
    // nothing left behind
    assert!(!out.join("gpdi").exists());
    assert!(fs::read_dir(&out).map(|d| d.count()).unwrap_or(0) == 0);
}

#[test]
fn ks_over_three_digests_gives_three_cells() {
    let dir = tempdir().unwrap();
    let scored = dir.path().join("three.csv");
    write_scored(&scored, &[("AA", 40), ("BB", 50), ("CC", 45)], 2);
    let out = dir.path().join("out");
    for s in ["gpdi", "ks"] {
        let o = gpdi(&[s, "--scored", scored.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (h, rows) = read_csv(&out.join("ks/ks_matrix.csv"));
    assert_eq!(h, ["group_a", "group_b", "D", "p"]);
    assert_eq!(rows.len(), 3);
    let ks = json(&out.join("ks/ks_heatmap.json"));
    assert_eq!(ks["seed"], 42);
    assert_eq!(ks["d"][0][0], serde_json::Value::Null);
    assert_eq!(ks["d"][0][1], ks["d"][1][0]);
}

#[test]
fn cluster_candidates_give_two_silhouette_rows() {
    let dir = tempdir().unwrap();
    let out = dir.path();
    stage("gpdi", out, None);
    stage("cluster", out, None);
    let (h, rows) = read_csv(&out.join("cluster/silhouette.csv"));
    assert_eq!(h, ["k", "silhouette", "degenerate", "chosen"]);
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["8", "13"]);
    assert_eq!(rows.iter().filter(|r| r[3] == "true").count(), 1);
    let c = json(&out.join("cluster/clusters.json"));
    assert_eq!(c["individuals"]["country"], "US");
    assert_eq!(c["individuals"]["sampled"], 100);
    let nwk = fs::read_to_string(out.join("cluster/countries.nwk")).unwrap();
    assert!(nwk.trim_end().ends_with(';'));
    assert_eq!(nwk.matches(':').count(), 2 * 12 - 2);
}

#[test]
fn missing_stage_outputs_exit_4() {
    let dir = tempdir().unwrap();
    let out = dir.path();
    let cfg = fixture("config.toml");
    let run = |s: &str| gpdi(&[s, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);

    let o = run("ks");
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("gpdi.json"));

    for s in ["gpdi", "cluster", "regress"] {
        stage(s, out, None);
    }
    let o = run("report");
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("ks_heatmap.json"), "{}", stderr(&o));
    assert!(!out.join("report").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("out");
    let scored = fixture("scored.csv");
    let base = ["gpdi", "--scored", scored.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let with = |extra: &[&str]| {
        let mut a: Vec<&str> = base.to_vec();
        a.extend_from_slice(extra);
        gpdi(&a, None)
    };
    for extra in [
        &["--linkage", "ward", "--metric", "cosine_distance"][..],
        &["--pair-budget", "10"],
        &["--subsample", "1.5"],
        &["--k-candidates", "1,8"],
        &["--coding", "5-1"],
        &["--centering", "sideways"],
        &["--covariates", "/nonexistent/cov.csv"],
        &["--threads", "0"],
    ] {
        let o = with(extra);
        assert_eq!(o.status.code(), Some(2), "{extra:?}: {}", stderr(&o));
    }
    let o = gpdi(&["gpdi", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "seed = 1\nunknown_key = 3\n").unwrap();
    let o = gpdi(&["gpdi", "--config", bad.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown_key"));
}

#[test]
fn flags_override_config_and_seed_is_echoed() {
    let dir = tempdir().unwrap();
    let cfg = fixture("config.toml");
    let o = gpdi(
        &["gpdi", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--seed", "7"],
        None,
    );
    assert!(o.status.success());
    let m = json(&dir.path().join("gpdi/manifest.json"));
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config"]["seed"], 7);
    assert_eq!(m["config"]["pair_budget"], 10000);
    assert!(m["config"].get("out").is_none() && m["config"].get("threads").is_none());
    assert_eq!(json(&dir.path().join("gpdi/gpdi.json"))["seed"], 7);
}

#[test]
fn regress_needs_covariates() {
    let dir = tempdir().unwrap();
    stage("gpdi", dir.path(), None);
    let o = gpdi(
        &["regress", "--scored", fixture("scored.csv").to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
}
