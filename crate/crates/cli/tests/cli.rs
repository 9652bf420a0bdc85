use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn nsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsp")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = nsp(args);
    assert!(
        out.status.success(),
        "nsp {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .display()
        .to_string()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn metric(csv: &str, name: &str) -> f64 {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{name},")))
        .unwrap_or_else(|| panic!("no {name} in\n{csv}"))
        .parse()
        .unwrap()
}

fn generate(dir: &TempDir, cfg: &str, seed: &str) -> (String, String) {
    let (data, mask) = (path(dir, "data.json"), path(dir, "mask.json"));
    ok(&[
        "generate",
        "--config",
        &config(cfg),
        "--seed",
        seed,
        "--out",
        &data,
        "--mask-out",
        &mask,
    ]);
    (data, mask)
}

#[test]
fn generate_is_reproducible_per_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = config("gaussian2d.json");
    let read = |name: &str, seed: &str| {
        let p = path(&dir, name);
        ok(&["generate", "--config", &cfg, "--seed", seed, "--out", &p]);
        fs::read(p).unwrap()
    };
    assert_eq!(read("a.json", "5"), read("b.json", "5"));
    assert_ne!(read("a.json", "5"), read("c.json", "6"));
}

#[test]
fn every_construction_generates() {
    let dir = TempDir::new().unwrap();
    for c in ["v1", "v2", "v3", "v4", "v5"] {
        let p = path(&dir, &format!("{c}.json"));
        ok(&["generate", "--config", &config("document.json"), "--construction", c, "--out", &p]);
        let v: serde_json::Value = serde_json::from_slice(&fs::read(&p).unwrap()).unwrap();
        assert_eq!(v["points"].as_array().unwrap().len(), v["z"].as_array().unwrap().len());
    }
}

#[test]
fn fit_then_eval_against_truth() {
    let dir = TempDir::new().unwrap();
    let (data, _) = generate(&dir, "gaussian2d.json", "11");
    let out = path(&dir, "fit");
    ok(&[
        "fit",
        "--config",
        &config("gaussian2d.json"),
        "--data",
        &data,
        "--out",
        &out,
        "--chains",
        "2",
        "--samples",
        "40",
    ]);
    for f in ["chain-0.jsonl", "chain-1.jsonl", "chain-0.trace.csv", "chain-1.trace.csv"] {
        assert!(Path::new(&out).join(f).exists(), "{f} missing");
    }
    let lines = fs::read_to_string(Path::new(&out).join("chain-0.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 40);
    let csv = ok(&[
        "eval",
        "--config",
        &config("gaussian2d.json"),
        "--data",
        &data,
        &format!("{out}/chain-0.jsonl"),
        &format!("{out}/chain-1.jsonl"),
    ]);
    assert_eq!(metric(&csv, "n_samples"), 80.0);
    let acc = metric(&csv, "co_occupancy");
    assert!((0.0..=1.0).contains(&acc), "{acc}");
    assert!(metric(&csv, "clusters_lower95") <= metric(&csv, "clusters_upper95"));
}

#[test]
fn chains_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let (data, _) = generate(&dir, "gaussian2d.json", "3");
    let run = |name: &str| {
        let out = path(&dir, name);
        ok(&[
            "fit",
            "--config",
            &config("gaussian2d.json"),
            "--data",
            &data,
            "--out",
            &out,
            "--chains",
            "1",
            "--samples",
            "10",
            "--seed",
            "9",
        ]);
        fs::read(Path::new(&out).join("chain-0.jsonl")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn masked_fit_scores_heldout_points() {
    let dir = TempDir::new().unwrap();
    let (data, mask) = generate(&dir, "sequence.json", "4");
    let out = path(&dir, "fit");
    ok(&[
        "fit",
        "--config",
        &config("sequence.json"),
        "--data",
        &data,
        "--mask",
        &mask,
        "--out",
        &out,
        "--chains",
        "1",
        "--samples",
        "20",
    ]);
    let csv = ok(&[
        "eval",
        "--config",
        &config("sequence.json"),
        "--data",
        &data,
        "--mask",
        &mask,
        &format!("{out}/chain-0.jsonl"),
    ]);
    let (n, n_fit, held) = (metric(&csv, "n_points"), metric(&csv, "n_fit"), metric(&csv, "heldout_points"));
    assert_eq!(n, n_fit + held);
    assert!(metric(&csv, "heldout_per_point").is_finite());
    // Without the mask the chain's samples do not match the dataset.
    let bad = nsp(&[
        "eval",
        "--config",
        &config("sequence.json"),
        "--data",
        &data,
        &format!("{out}/chain-0.jsonl"),
    ]);
    assert!(held == 0.0 || !bad.status.success());
}

#[test]
fn sharded_fit_runs_in_dpmm_mode() {
    let dir = TempDir::new().unwrap();
    let (data, mask) = generate(&dir, "gaussian2d.json", "8");
    let out = path(&dir, "fit");
    let cfg = config("gaussian2d.json");
    ok(&[
        "fit",
        "--config",
        &cfg,
        "--data",
        &data,
        "--out",
        &out,
        "--chains",
        "1",
        "--samples",
        "10",
        "--shards",
        "2",
        "--mode",
        "dpmm-limit",
    ]);
    let csv = ok(&["eval", "--config", &cfg, "--data", &data, &format!("{out}/chain-0.jsonl")]);
    assert_eq!(metric(&csv, "n_samples"), 10.0);
    let both = nsp(&[
        "fit", "--config", &cfg, "--data", &data, "--out", &out, "--shards", "2", "--mask", &mask,
    ]);
    assert_eq!(both.status.code(), Some(1));
}

#[test]
fn schema_errors_point_at_the_field() {
    let dir = TempDir::new().unwrap();
    let bad = path(&dir, "bad.json");
    fs::write(&bad, "{\n  \"model\": {\"gaussian2d\": {\"iw_dof\": 5, \"iw_scale\": [[1, 0], [0, 1]]}},\n  \"domain\": {\"lower\": [0, 0], \"upper\": [1, 1]},\n  \"prior\": {\"alpha\": 1, \"beta\": 1, \"nu_bar\": \"six\"}\n}\n").unwrap();
    let out = nsp(&["generate", "--config", &bad, "--out", &path(&dir, "x.json")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:4:") && err.contains("prior.nu_bar"), "{err}");

    fs::write(&bad, r#"{"model": {"sequence": {"n_neurons": 2, "n_types": 1}}, "domain": {"lower": [0, 0], "upper": [1, 1]}, "prior": {"alpha": 1, "beta": 1, "nu_bar": 1}}"#).unwrap();
    let out = nsp(&["generate", "--config", &bad, "--out", &path(&dir, "x.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain"));
}

#[test]
fn eval_needs_truth_or_mask() {
    let dir = TempDir::new().unwrap();
    let (data, _) = generate(&dir, "gaussian2d.json", "2");
    let out = path(&dir, "fit");
    ok(&[
        "fit",
        "--config",
        &config("gaussian2d.json"),
        "--data",
        &data,
        "--out",
        &out,
        "--chains",
        "1",
        "--samples",
        "5",
    ]);
    let res = nsp(&[
        "eval",
        "--config",
        &config("gaussian2d.json"),
        "--data",
        &data,
        "--no-truth",
        &format!("{out}/chain-0.jsonl"),
    ]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn urns_write_their_tables() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("urns");
    ok(&[
        "urns",
        "--out",
        out.to_str().unwrap(),
        "--n",
        "30",
        "--draws",
        "3000",
        "--seed",
        "1",
    ]);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    // The Chinese-restaurant urn has E[K] = Σ γ / (γ + i).
    for line in summary.lines().filter(|l| l.starts_with("dpmm,")) {
        let f: Vec<&str> = line.split(',').collect();
        let gamma: f64 = f[4].parse().unwrap();
        let mean: f64 = f[8].parse().unwrap();
        let sd: f64 = f[9].parse().unwrap();
        let expect: f64 = (0..30).map(|i| gamma / (gamma + i as f64)).sum();
        assert!((mean - expect).abs() < 4.0 * sd / 3000f64.sqrt(), "{line} vs {expect}");
    }
    let hist = fs::read_to_string(out.join("histogram.csv")).unwrap();
    let total: u64 = hist
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("nsp,exact,1,1,"))
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 3000);
    let labelings = fs::read_to_string(out.join("labelings.csv")).unwrap();
    assert!(labelings
        .lines()
        .skip(1)
        .all(|l| l.rsplit(',').next().unwrap().split(' ').count() == 30));
}

#[test]
fn oracle_matches_closed_forms() {
    let count = |args: &[&str]| ok(args).lines().count();
    assert_eq!(count(&["oracle", "partitions", "--n", "4"]), 15);
    assert_eq!(count(&["oracle", "partitions", "--n", "3", "--background"]), 15);
    // p(N = 0) = exp(−L̄ (1 − q)) with q = (β / (1 + β))^α.
    let w = ["--alpha", "2", "--beta", "1", "--lbar", "3"];
    let table = ok(&[&["oracle", "log-p-n"][..], &w, &["--max-n", "400"]].concat());
    let logs: Vec<f64> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!((logs[0] + 3.0 * 0.75).abs() < 1e-12);
    assert!((logs.iter().map(|l| l.exp()).sum::<f64>() - 1.0).abs() < 1e-9);
    // A single point forms a single block, so p(N = 1, C) = p(N = 1).
    let v: f64 = ok(&[&["oracle", "eppf"][..], &w, &["--sizes", "1"]].concat())
        .trim()
        .parse()
        .unwrap();
    assert!((v - logs[1]).abs() < 1e-12, "{v} vs {}", logs[1]);
    let too_big = nsp(&["oracle", "partitions", "--n", "40"]);
    assert_eq!(too_big.status.code(), Some(1));
}

#[test]
fn oracle_posterior_is_normalised() {
    let dir = TempDir::new().unwrap();
    let (data, _) = generate(&dir, "gaussian2d.json", "1");
    let mut v: serde_json::Value = serde_json::from_slice(&fs::read(&data).unwrap()).unwrap();
    let pts: Vec<_> = v["points"].as_array().unwrap().iter().take(5).cloned().collect();
    v = serde_json::json!({ "points": pts });
    let small: PathBuf = dir.path().join("small.json");
    fs::write(&small, v.to_string()).unwrap();
    let csv = ok(&[
        "oracle",
        "posterior",
        "--config",
        &config("gaussian2d.json"),
        "--data",
        small.to_str().unwrap(),
    ]);
    // with background: one row per (background set, partition of the rest) = Bell(6)
    assert_eq!(csv.lines().count() - 1, 203);
    let total: f64 = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
}
