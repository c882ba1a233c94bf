use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use defermdp::net::{GraphSageNet, NetConfig};
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_defermdp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn run_err(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        !out.status.success(),
        "command {args:?} unexpectedly succeeded"
    );
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Parses NDJSON results: per-graph records plus the trailing summary.
fn parse_results(text: &str) -> (Vec<Value>, Value) {
    let mut lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).expect("valid JSON line"))
        .collect();
    let summary = lines.pop().expect("summary line");
    assert!(summary.get("graphs").is_some(), "last line is the summary");
    (lines, summary)
}

fn tiny_config(dir: &Path, updates: usize, seed: u64) -> std::path::PathBuf {
    let text = format!(
        "problem = mis\nhorizon = 4\nunroll = 4\nenvs_per_batch = 4\nminibatch = 4\n\
         grad_steps = 1\nalpha = 0.1\nentropy_coeff = 0.1\nclip_eps = 0.2\nlr = 0.0001\n\
         updates = {updates}\nval_samples = 1\nval_interval = 1\nval_graphs = 2\nseed = {seed}\n\
         dataset_model = er\ndataset_p = 0.3\ndataset_n_min = 6\ndataset_n_max = 8\n"
    );
    let path = dir.join("tiny.cfg");
    fs::write(&path, text).unwrap();
    path
}

fn write_checkpoint(dir: &Path, cfg: NetConfig, seed: u64) -> std::path::PathBuf {
    let net = GraphSageNet::new(cfg, seed);
    let path = dir.join("net.ckpt");
    net.store.save(&path).unwrap();
    path
}

#[test]
fn gen_writes_dataset_with_distinct_seeds() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("ds");
    run_ok(&[
        "gen",
        "--model",
        "er",
        "--n-min",
        "10",
        "--n-max",
        "14",
        "--count",
        "6",
        "--p",
        "0.2",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 6);
    let mut seeds: Vec<u64> = files.iter().map(|f| f["seed"].as_u64().unwrap()).collect();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 6, "per-file seeds are distinct");
    for f in files {
        let n = f["n"].as_u64().unwrap();
        assert!((10..=14).contains(&n));
        assert!(out.join(f["file"].as_str().unwrap()).exists());
    }
}

#[test]
fn gen_regenerates_byte_identical_files() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("a");
    let second = tmp.path().join("b");
    run_ok(&[
        "gen",
        "--model",
        "ws",
        "--n-min",
        "12",
        "--n-max",
        "16",
        "--count",
        "4",
        "--k",
        "4",
        "--p-rewire",
        "0.2",
        "--seed",
        "3",
        "--out",
        first.to_str().unwrap(),
    ]);
    run_ok(&[
        "gen",
        "--from-manifest",
        first.join("manifest.json").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    for entry in fs::read_dir(&first).unwrap() {
        let name = entry.unwrap().file_name();
        if name == "manifest.json" {
            continue;
        }
        assert_eq!(
            fs::read(first.join(&name)).unwrap(),
            fs::read(second.join(&name)).unwrap(),
            "{name:?} regenerated byte-identical"
        );
    }
}

#[test]
fn gen_rejects_bad_params() {
    let tmp = TempDir::new().unwrap();
    let err = run_err(&[
        "gen",
        "--model",
        "er",
        "--p",
        "1.5",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(err.contains("p"), "names the bad parameter: {err}");
    let err = run_err(&[
        "gen",
        "--model",
        "ba",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(err.contains("m-attach"), "names the missing flag: {err}");
}

#[test]
fn gen_reduces_cnf_directory() {
    let tmp = TempDir::new().unwrap();
    let cnf_dir = tmp.path().join("cnf");
    fs::create_dir(&cnf_dir).unwrap();
    fs::write(
        cnf_dir.join("sat.cnf"),
        "c satisfiable\np cnf 3 2\n1 2 3 0\n-1 2 0\n",
    )
    .unwrap();
    fs::write(cnf_dir.join("unsat.cnf"), "p cnf 1 2\n1 0\n-1 0\n").unwrap();
    let out = tmp.path().join("graphs");
    run_ok(&[
        "gen",
        "--model",
        "sat",
        "--cnf-dir",
        cnf_dir.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);

    let text = run_ok(&[
        "oracle",
        "--dataset",
        out.to_str().unwrap(),
        "--problem",
        "mis",
    ]);
    let (records, _) = parse_results(&text);
    for rec in &records {
        let mis = rec["objective"].as_f64().unwrap();
        match rec["file"].as_str().unwrap() {
            "sat.txt" => assert_eq!(mis, 2.0, "satisfiable: MIS equals clause count"),
            "unsat.txt" => assert_eq!(mis, 1.0, "unsatisfiable: MIS falls short"),
            other => panic!("unexpected file {other}"),
        }
        assert_eq!(rec["exact"], Value::Bool(true));
    }
}

#[test]
fn train_emits_checkpoints_and_metrics() {
    let tmp = TempDir::new().unwrap();
    let cfg = tiny_config(tmp.path(), 3, 11);
    let out = tmp.path().join("run");
    run_ok(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(out.join("best.ckpt").exists());
    assert!(out.join("last.ckpt").exists());
    let metrics = fs::read_to_string(out.join("metrics.ndjson")).unwrap();
    assert_eq!(metrics.lines().count(), 3, "one metrics line per update");
    for line in metrics.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        for key in ["update", "mean_return", "entropy", "loss", "wall_ms"] {
            assert!(v.get(key).is_some(), "metrics line has {key}");
        }
    }
}

#[test]
fn train_names_the_missing_config_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("broken.cfg");
    let full = fs::read_to_string(tiny_config(tmp.path(), 1, 0)).unwrap();
    let without_lr: String =
        full.lines()
            .filter(|l| !l.starts_with("lr"))
            .fold(String::new(), |mut acc, l| {
                acc.push_str(l);
                acc.push('\n');
                acc
            });
    fs::write(&cfg, without_lr).unwrap();
    let err = run_err(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("run").to_str().unwrap(),
    ]);
    assert!(err.contains("lr"), "error names the missing key: {err}");
}

#[test]
fn eval_finds_the_four_cycle_optimum() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("ds");
    fs::create_dir(&ds).unwrap();
    fs::write(ds.join("c4.txt"), "4 4\n0 1\n1 2\n2 3\n0 3\n").unwrap();
    let ckpt = write_checkpoint(tmp.path(), NetConfig::default(), 0);

    let text = run_ok(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--dataset",
        ds.to_str().unwrap(),
        "--samples",
        "10",
        "--horizon",
        "8",
        "--seed",
        "1",
    ]);
    let (records, summary) = parse_results(&text);
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["objective"].as_f64().unwrap(), 2.0);
    assert_eq!(records[0]["feasible"], Value::Bool(true));
    assert_eq!(records[0]["samples"].as_u64().unwrap(), 10);
    assert_eq!(summary["max_objective"].as_f64().unwrap(), 2.0);
}

#[test]
fn eval_local_search_dominates_paired_run() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("ds");
    run_ok(&[
        "gen",
        "--model",
        "er",
        "--n-min",
        "12",
        "--n-max",
        "16",
        "--count",
        "5",
        "--p",
        "0.25",
        "--seed",
        "4",
        "--out",
        ds.to_str().unwrap(),
    ]);
    let ckpt = write_checkpoint(tmp.path(), NetConfig::default(), 0);
    let base = [
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--dataset",
        ds.to_str().unwrap(),
        "--samples",
        "4",
        "--horizon",
        "8",
        "--seed",
        "2",
    ];
    let plain = run_ok(&base);
    let mut with_ls = base.to_vec();
    with_ls.push("--local-search");
    let polished = run_ok(&with_ls);

    let (plain_recs, _) = parse_results(&plain);
    let (ls_recs, _) = parse_results(&polished);
    for (a, b) in plain_recs.iter().zip(&ls_recs) {
        assert_eq!(a["file"], b["file"]);
        assert!(
            b["objective"].as_f64().unwrap() >= a["objective"].as_f64().unwrap(),
            "local search never hurts on {}",
            a["file"]
        );
        assert_eq!(b["feasible"], Value::Bool(true));
    }
}

#[test]
fn eval_rejects_empty_dataset_and_bad_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let ckpt = write_checkpoint(tmp.path(), NetConfig::default(), 0);
    let err = run_err(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--dataset",
        empty.to_str().unwrap(),
    ]);
    assert!(err.contains("no edge-list"), "{err}");

    let ds = tmp.path().join("ds");
    fs::create_dir(&ds).unwrap();
    fs::write(ds.join("p2.txt"), "2 1\n0 1\n").unwrap();
    let small = NetConfig {
        layers: 2,
        ..NetConfig::default()
    };
    let bad = write_checkpoint(&tmp.path().join("."), small, 0);
    let err = run_err(&[
        "eval",
        "--checkpoint",
        bad.to_str().unwrap(),
        "--dataset",
        ds.to_str().unwrap(),
    ]);
    assert!(
        err.contains("incompatible") || err.contains("checkpoint"),
        "{err}"
    );
}

#[test]
fn solve_is_bounded_by_oracle_pointwise() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("ds");
    run_ok(&[
        "gen",
        "--model",
        "er",
        "--n-min",
        "14",
        "--n-max",
        "18",
        "--count",
        "6",
        "--p",
        "0.2",
        "--seed",
        "12",
        "--out",
        ds.to_str().unwrap(),
    ]);
    let greedy = run_ok(&[
        "solve",
        "--dataset",
        ds.to_str().unwrap(),
        "--method",
        "greedy",
    ]);
    let polished = run_ok(&[
        "solve",
        "--dataset",
        ds.to_str().unwrap(),
        "--method",
        "greedy+ls",
    ]);
    let exact = run_ok(&[
        "oracle",
        "--dataset",
        ds.to_str().unwrap(),
        "--problem",
        "mis",
    ]);
    let (g, _) = parse_results(&greedy);
    let (p, _) = parse_results(&polished);
    let (e, _) = parse_results(&exact);
    for ((a, b), c) in g.iter().zip(&p).zip(&e) {
        let (ga, pb, ec) = (
            a["objective"].as_f64().unwrap(),
            b["objective"].as_f64().unwrap(),
            c["objective"].as_f64().unwrap(),
        );
        assert!(
            ga <= pb && pb <= ec,
            "greedy {ga} <= greedy+ls {pb} <= oracle {ec}"
        );
        assert_eq!(a["feasible"], Value::Bool(true));
    }
}

#[test]
fn oracle_rejects_graphs_above_the_cap() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("ds");
    fs::create_dir(&ds).unwrap();
    fs::write(ds.join("big.txt"), "50 1\n0 1\n").unwrap();
    let err = run_err(&[
        "oracle",
        "--dataset",
        ds.to_str().unwrap(),
        "--problem",
        "mis",
    ]);
    assert!(err.contains("big.txt"), "names the offending file: {err}");
    let err = run_err(&[
        "oracle",
        "--dataset",
        ds.to_str().unwrap(),
        "--problem",
        "maxcut",
    ]);
    assert!(err.contains("big.txt"), "{err}");
}

#[test]
fn results_are_reproducible_modulo_time() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("ds");
    run_ok(&[
        "gen",
        "--model",
        "er",
        "--n-min",
        "10",
        "--n-max",
        "12",
        "--count",
        "3",
        "--p",
        "0.3",
        "--seed",
        "8",
        "--out",
        ds.to_str().unwrap(),
    ]);
    let ckpt = write_checkpoint(tmp.path(), NetConfig::default(), 7);
    let args = [
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--dataset",
        ds.to_str().unwrap(),
        "--samples",
        "3",
        "--horizon",
        "8",
        "--seed",
        "5",
    ];
    let strip = |text: &str| -> Vec<Value> {
        text.lines()
            .map(|l| {
                let mut v: Value = serde_json::from_str(l).unwrap();
                v.as_object_mut().unwrap().remove("time_ms");
                v
            })
            .collect()
    };
    assert_eq!(strip(&run_ok(&args)), strip(&run_ok(&args)));
}
