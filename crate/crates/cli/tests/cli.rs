use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ufrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ufrank"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn error_record(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr not JSON ({e}): {text}"))
}

/// 10 rows, 6 features and a class column.
fn small_csv(dir: &Path) -> String {
    let mut text = String::from("a,b,c,d,e,f,class\n");
    for r in 0..10 {
        let c = r % 2;
        text.push_str(&format!(
            "{},{},{},{},{},{},{c}\n",
            c * 5 + r % 3,
            (r * 7) % 4,
            c * 4,
            r,
            (r * 3) % 5,
            if c == 0 { "x" } else { "y" },
        ));
    }
    let path = dir.join("small.csv");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn rank_writes_a_descending_ranking_with_its_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_csv(dir.path());
    let out = dir.path().join("out");
    let o = out.to_string_lossy();
    let res = ufrank(&["rank", "--data", &data, "--out", &o, "--trees", "20", "--workers", "2"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let artifact = read_json(&out.join("small_genie3_rank_0.json"));
    let importance: Vec<f64> = artifact["result"]["importance"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(importance.len(), 6);
    let order: Vec<usize> = artifact["result"]["order"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect();
    assert!(order.windows(2).all(|w| importance[w[0]] >= importance[w[1]]));

    let config = &artifact["config"];
    assert_eq!(config["ranker"]["method"], "genie3");
    assert_eq!(config["ranker"]["config"]["trees"], 20);
    assert_eq!(config["ranker"]["config"]["method"], "extra_trees");
    assert_eq!(config["data"]["target"], "class");
    assert!(config.get("workers").is_none());

    let csv = fs::read_to_string(out.join("small_genie3_rank_0.csv")).unwrap();
    assert!(csv.starts_with("rank,attribute,importance\n"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn rank_accepts_files_without_a_target_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plain.csv");
    fs::write(&path, "p,q\n1,5\n2,3\n3,3\n4,1\n").unwrap();
    let o = dir.path().to_string_lossy();
    let res = ufrank(&[
        "rank", "--data", &path.to_string_lossy(), "--method", "urelief", "--out", &o,
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let artifact = read_json(&dir.path().join("plain_urelief_rank_0.json"));
    assert_eq!(artifact["result"]["attributes"].as_array().unwrap().len(), 2);
}

#[test]
fn curve_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_csv(dir.path());
    let mut bodies = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}"));
        let res = ufrank(&[
            "curve", "--data", &data, "--method", "rf-score", "--trees", "10", "--folds", "5",
            "--seed", "3", "--out", &out.to_string_lossy(),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        bodies.push(fs::read(out.join("small_rf-score_curve_3.json")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn config_file_fills_in_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_csv(dir.path());
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"method": "urelief", "neighbors": 3, "seed": 5, "folds": 5, "top_k": 2}"#)
        .unwrap();
    let o = dir.path().to_string_lossy();
    let res = ufrank(&[
        "eval", "--data", &data, "--config", &cfg.to_string_lossy(), "--neighbors", "4", "--out", &o,
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let artifact = read_json(&dir.path().join("small_urelief_eval_5.json"));
    let config = &artifact["config"];
    assert_eq!(config["ranker"]["config"]["neighbors"], 4);
    assert_eq!(config["ranker"]["config"]["seed"], 5);
    assert_eq!(config["folds"], 5);
    assert_eq!(config["top_k"], 2);
    assert_eq!(artifact["result"]["per_fold"].as_array().unwrap().len(), 5);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(ufrank(&["--help"]).status.code(), Some(0));
    assert_eq!(ufrank(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let res = ufrank(&["rank", "--data", "x.csv", "--subset-rule", "cube"]);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(error_record(&res)["error"]["kind"], "usage");

    let dir = tempfile::tempdir().unwrap();
    let data = small_csv(dir.path());
    let res = ufrank(&["rank", "--data", &data, "--method", "genie3", "--neighbors", "5"]);
    assert_eq!(res.status.code(), Some(1));

    let res = ufrank(&["eval", "--data", &data, "--method", "urelief", "--neighbors", "10"]);
    assert_eq!(res.status.code(), Some(1), "K >= m is a configuration error");
}

#[test]
fn data_errors_exit_two() {
    let res = ufrank(&["rank", "--data", "/nonexistent/file.csv"]);
    assert_eq!(res.status.code(), Some(2));
    let record = error_record(&res);
    assert_eq!(record["error"]["kind"], "data");
    assert_eq!(record["error"]["exit_code"], 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "a,class\n1,0\n2,oops\n3,0\n4,1\n").unwrap();
    let res = ufrank(&["eval", "--data", &bad.to_string_lossy(), "--method", "urelief", "--folds", "2"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn undefined_scores_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.csv");
    fs::write(&flat, "a,b\n1,2\n1,2\n1,2\n1,2\n1,2\n").unwrap();
    let res = ufrank(&[
        "rank", "--data", &flat.to_string_lossy(), "--method", "rf-score", "--trees", "5",
        "--out", &dir.path().to_string_lossy(),
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert_eq!(error_record(&res)["error"]["kind"], "computation");
}

#[test]
fn synth_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_string_lossy().into_owned();
    for seed in ["1", "2", "3"] {
        let res = ufrank(&[
            "synth", "--m", "60", "--informative", "2", "--noise", "4", "--clusters", "2",
            "--seed", seed, "--out", &d,
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let truth = read_json(&dir.path().join("planted_s1.truth.json"));
    assert_eq!(truth["informative_indices"].as_array().unwrap().len(), 2);

    let evals = dir.path().join("evals");
    let e = evals.to_string_lossy().into_owned();
    for seed in ["1", "2", "3"] {
        let data = dir.path().join(format!("planted_s{seed}.csv"));
        for method in [&["--method", "urelief"][..], &["--method", "symbolic", "--trees", "10"][..]] {
            let res = ufrank(
                &[&["eval", "--data", &data.to_string_lossy(), "--top-k", "2", "--folds", "4", "--out", &e][..], method]
                    .concat(),
            );
            assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        }
    }
    let mut inputs: Vec<String> = fs::read_dir(&evals)
        .unwrap()
        .map(|p| p.unwrap().path().to_string_lossy().into_owned())
        .filter(|p| p.ends_with(".json"))
        .collect();
    inputs.sort();
    assert_eq!(inputs.len(), 6);
    let mut args = vec!["compare", "--out", &d];
    args.extend(inputs.iter().map(String::as_str));
    let res = ufrank(&args);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let report = read_json(&dir.path().join("benchmark_methods_compare_0.json"));
    assert_eq!(report["result"]["datasets"].as_array().unwrap().len(), 3);
    let ranks: f64 = report["result"]["average_ranks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .sum();
    assert!((ranks - 3.0).abs() < 1e-12);

    // An incomplete matrix is a data error.
    let res = ufrank(&["compare", "--out", &d, &inputs[0], &inputs[1], &inputs[2]]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn ari_check_reports_a_median() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_string_lossy().into_owned();
    let res = ufrank(&["synth", "--m", "80", "--clusters", "2", "--noise", "0", "--seed", "4", "--out", &d]);
    assert!(res.status.success());
    let data = dir.path().join("planted_s4.csv");
    let res = ufrank(&["ari-check", "--data", &data.to_string_lossy(), "--runs", "5", "--out", &d]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = read_json(&dir.path().join("planted_s4_kmeans_ari-check_0.json"));
    assert!(report["result"]["median"].as_f64().unwrap() > 0.9);
    assert_eq!(report["result"]["runs"].as_array().unwrap().len(), 5);
}
