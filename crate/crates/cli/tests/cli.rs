use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use iswerm_lab::config::LabConfig;
use iswerm_lab::manifest::RunManifest;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iswerm-lab"))
        .args(args)
        .env_remove("ISWERM_LAB_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = lab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn explain_config_prints_parseable_defaults() {
    let out = ok(&["--explain-config"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(LabConfig::parse(&text).unwrap(), LabConfig::default());
}

#[test]
fn bench_table_has_a_row_per_scheme_and_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("b");
    ok(&["--out-dir", s(&o), "bandit-bench", "--T", "500", "--reps", "2"]);
    let agg = read(o.join("bench_aggregate.csv"));
    let mut lines = agg.lines();
    assert_eq!(lines.next().unwrap(), "scheme,model,beta,T,mean,se");
    assert_eq!(lines.count(), 21);
    assert_eq!(read(o.join("bench_reps.csv")).lines().next().unwrap(), "scheme,model,beta,T,rep,loss");
    assert_eq!(read(o.join("bench_reps.csv")).lines().count(), 43);
    let dat = read(o.join("plots/bench_ridge_iswerm.dat"));
    assert_eq!(dat.lines().nth(1).unwrap().split_whitespace().count(), 3);
    assert!(o.join("plots/bench.gp").exists());
    let m = RunManifest::load(&o.join("manifest.json")).unwrap();
    let mut listed: Vec<String> = m.artifacts.iter().map(|a| a.path.display().to_string()).collect();
    listed.sort();
    let mut on_disk = Vec::new();
    for sub in ["", "plots"] {
        for e in std::fs::read_dir(o.join(sub)).unwrap() {
            let e = e.unwrap();
            if e.file_type().unwrap().is_file() && e.file_name() != "manifest.json" {
                on_disk.push(Path::new(sub).join(e.file_name()).display().to_string());
            }
        }
    }
    on_disk.sort();
    assert_eq!(listed, on_disk);
}

#[test]
fn identical_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (o, threads) in [(&a, "1"), (&b, "4")] {
        ok(&["--out-dir", s(o), "--threads", threads, "bandit-bench", "--T", "200,400", "--reps", "3"]);
    }
    for f in ["bench_reps.csv", "bench_aggregate.csv", "bench_compare.csv", "plots/bench_cart_mrdr.dat"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
}

#[test]
fn constant_weights_make_iswerm_and_unweighted_agree() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("b");
    ok(&[
        "--out-dir", s(&o), "bandit-bench", "--T", "300", "--reps", "2", "--beta", "0", "--models", "wls",
        "--schemes", "iswerm,unweighted",
    ]);
    let agg = read(o.join("bench_aggregate.csv"));
    let means: Vec<f64> = agg.lines().skip(1).map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
    assert_eq!(means.len(), 2);
    assert!((means[0] - means[1]).abs() <= 1e-9 * means[0].abs(), "{means:?}");
}

#[test]
fn empty_horizon_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[sweep]\nhorizons = []\n").unwrap();
    let out = lab(&["--config", s(&cfg), "--out-dir", s(&dir.path().join("o")), "rate-sweep"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizons must not be empty"));
}

#[test]
fn failed_theory_check_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "[theory.sup]\nhorizons = [32, 64, 128]\nn_reps = 10\nn_boot = 10\ntolerance = 0.0\n",
    )
    .unwrap();
    let o = dir.path().join("o");
    let out = lab(&["--config", s(&cfg), "--out-dir", s(&o), "theory-check", "--suite", "supscaling"]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&read(o.join("report.json"))).unwrap();
    assert!(report.as_array().unwrap().iter().all(|r| r["passed"] == false));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL sup-process-scaling"));
}

#[test]
fn passing_theory_suite_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let out = ok(&["--out-dir", s(&o), "theory-check", "--suite", "unbiasedness"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
    assert!(text.contains("is-unbiasedness-negative-control"));
}

#[test]
fn seed_and_thread_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let o = dir.path().join(name);
        ok(&["--out-dir", s(&o), "--seed", seed, "collect", "--T", "50"]);
        o
    };
    let (a, b, c) = (run("a", "1"), run("b", "1"), run("c", "2"));
    assert_eq!(read(a.join("dataset.jsonl")), read(b.join("dataset.jsonl")));
    assert_ne!(read(a.join("dataset.jsonl")), read(c.join("dataset.jsonl")));
    let m = RunManifest::load(&c.join("manifest.json")).unwrap();
    assert_eq!((m.seeds.master, m.seeds.bench, m.seeds.sweep), (2, 2, 2));

    let o = dir.path().join("t");
    let out = Command::new(env!("CARGO_BIN_EXE_iswerm-lab"))
        .args(["--out-dir", s(&o), "collect", "--T", "20"])
        .env("ISWERM_LAB_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(RunManifest::load(&o.join("manifest.json")).unwrap().threads, 3);
}

#[test]
fn train_learn_and_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["--out-dir", s(&d.join("c")), "collect", "--env", "step:d=2,k=3", "--T", "600", "--greedy", "tree"]);
    let data = d.join("c/dataset.jsonl");
    ok(&[
        "--out-dir", s(&d.join("t")), "train", "--data", s(&data), "--scheme", "sqrtisfloor", "--model", "ridge",
        "--cv-folds", "3", "--lambda-grid", "0.01,0.1,1",
    ]);
    let model: serde_json::Value = serde_json::from_str(&read(d.join("t/model.json"))).unwrap();
    assert!([0.01, 0.1, 1.0].contains(&model["fitted"]["lambda"].as_f64().unwrap()));
    let out = ok(&[
        "--out-dir", s(&d.join("e")), "evaluate", "--env", "step:d=2,k=3", "--model", s(&d.join("t/model.json")),
        "--n-test", "500",
    ]);
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["n_test"], 500);
    assert!(rep["excess_risk"]["value"].as_f64().unwrap() >= 0.0);

    ok(&["--out-dir", s(&d.join("p")), "learn-policy", "--data", s(&data), "--class", "tree:1"]);
    let out = ok(&[
        "--out-dir", s(&d.join("pe")), "evaluate", "--env", "step:d=2,k=3", "--policy", s(&d.join("p/policy.json")),
    ]);
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(rep["regret"]["value"].as_f64().unwrap() >= 0.0);

    let wrong = lab(&[
        "--out-dir", s(&d.join("w")), "evaluate", "--env", "linear:d=5,k=3", "--model", s(&d.join("t/model.json")),
    ]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn finite_policy_class_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["--out-dir", s(&d.join("c")), "collect", "--env", "linear:d=1,k=2", "--T", "300"]);
    let class = d.join("class.json");
    std::fs::write(&class, r#"[{"type":"constant","arm":0},{"type":"constant","arm":1}]"#).unwrap();
    ok(&[
        "--out-dir", s(&d.join("p")), "learn-policy", "--data", s(&d.join("c/dataset.jsonl")), "--class",
        &format!("finite:{}", s(&class)),
    ]);
    let p: serde_json::Value = serde_json::from_str(&read(d.join("p/policy.json"))).unwrap();
    assert!(p["fit"]["index"].as_u64().unwrap() < 2);
    let m = RunManifest::load(&d.join("p/manifest.json")).unwrap();
    assert_eq!(m.inputs.len(), 2);
}

#[test]
fn ingest_then_classification_bench() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("x1,x2,color,label\n");
    for i in 0..60 {
        let color = ["red", "blue"][i % 2];
        let x1 = if i == 7 { "NA".to_string() } else { (i as f64 * 0.1).to_string() };
        csv.push_str(&format!("{x1},{},{color},c{}\n", (i * 7 % 11) as f64, i % 3));
    }
    let src = d.join("raw.csv");
    std::fs::write(&src, csv).unwrap();
    ok(&["--out-dir", s(&d.join("i")), "ingest", "--data", s(&src), "--label-col", "label"]);
    let summary: serde_json::Value = serde_json::from_str(&read(d.join("i/ingested.summary.json"))).unwrap();
    assert_eq!(summary["rows"], 59);
    assert_eq!(summary["num_classes"], 3);
    let clean = d.join("i/ingested.csv");
    let env = format!("csv:path={},label=label,standardize=false", s(&clean));
    let o = d.join("b");
    ok(&[
        "--out-dir", s(&o), "bandit-bench", "--env", &env, "--T", "300", "--reps", "2", "--models", "ridge",
        "--test-size", "200",
    ]);
    let m = RunManifest::load(&o.join("manifest.json")).unwrap();
    assert_eq!(m.inputs.len(), 1);
    let out = lab(&["--out-dir", s(&d.join("e")), "evaluate", "--env", &env, "--model", "nothing.json"]);
    assert!(!out.status.success());
}

#[test]
fn replay_reproduces_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("run");
    ok(&["--out-dir", s(&o), "--seed", "9", "rate-sweep", "--T", "64,128,256", "--reps", "10"]);
    let out = ok(&["replay", "--manifest", s(&o.join("manifest.json"))]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("identical")).count() >= 5);
    assert!(!text.contains("DIFFERS"));
    // A second replay into the same directory is refused.
    assert!(!lab(&["replay", "--manifest", s(&o.join("manifest.json"))]).status.success());

    let mut m: serde_json::Value = serde_json::from_str(&read(o.join("manifest.json"))).unwrap();
    m["artifacts"][0]["sha256"] = "00".into();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&m).unwrap()).unwrap();
    let out = lab(&["replay", "--manifest", s(&bad), "--into", s(&dir.path().join("r2"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("DIFFERS"));

    m["config"]["seed"] = 10.into();
    std::fs::write(&bad, serde_json::to_string(&m).unwrap()).unwrap();
    let out = lab(&["replay", "--manifest", s(&bad), "--into", s(&dir.path().join("r3"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outputs_must_stay_inside_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["--out-dir", s(dir.path()), "collect", "--T", "20", "--out", "../escape.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
}
