use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_implicit-auth");

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .env_remove("IMPLICIT_AUTH_RESULTS_DIR")
        .env_remove("IMPLICIT_AUTH_CONFIG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cli(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn log_lines(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

const SMALL: [&str; 6] = ["--users", "3", "--lab-users", "2", "--per-context-s", "300"];

fn generate(dir: &Path, out: &str, format: &str) {
    ok(dir, &["generate", "--out", out, "--users", "3", "--per-context-s", "300", "--block-s", "150", "--format", format]);
}

#[test]
fn train_and_run_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    generate(d, "data", "csv");
    for f in ["user_0.csv", "user_1.csv", "user_2.csv", "truth.csv", "profiles.json"] {
        assert!(d.join("data").join(f).exists(), "{f}");
    }
    let inputs = ["data/user_0.csv", "data/user_1.csv", "data/user_2.csv"];
    let mut args = vec!["extract", "--truth", "data/truth.csv", "--out", "feat.csv"];
    args.extend(inputs);
    ok(d, &args);
    let header = fs::read_to_string(d.join("feat.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.starts_with("window,phone_acc_mean,") && header.ends_with("watch_gyr_peak2,user_id,context"));

    ok(d, &["train-context", "--features", "feat.csv", "--out", "ctx.json", "--trees", "20"]);
    ok(d, &["train-auth", "--features", "feat.csv", "--context-model", "ctx.json", "--data-size", "100", "--out", "bank.json"]);
    let bank = json(&d.join("bank.json"));
    assert_eq!(bank["owner_id"], 0);
    assert_eq!(bank["models"].as_array().unwrap().len(), 4);

    ok(d, &[
        "train-auth", "--features", "feat.csv", "--context-model", "ctx.json", "--rho", "1.0", "--context", "moving",
        "--out", "moving.json",
    ]);
    let model = json(&d.join("moving.json"));
    assert_eq!(model["context"], "moving");
    assert_eq!(model["schema_version"], 1);
    assert_eq!(json(&d.join("ctx.json"))["schema_version"], 1);
    assert_eq!(model["w"].as_array().unwrap().len(), 28);

    let owner = log_lines(&ok(d, &["run", "--bank", "bank.json", "--input", "data/user_0.csv"]));
    assert_eq!(owner.len(), 100);
    let accepted = owner.iter().filter(|l| l["verdict"] == "accept").count();
    assert!(accepted >= 95, "{accepted}");

    ok(d, &["run", "--bank", "bank.json", "--input", "data/user_2.csv", "--out", "imp.jsonl"]);
    let imp = log_lines(&fs::read_to_string(d.join("imp.jsonl")).unwrap());
    let first_reject = imp.iter().position(|l| l["verdict"] == "reject").unwrap();
    assert!(first_reject < 3);
    assert_eq!(imp[first_reject]["events"][0]["type"], "lockout");
}

#[test]
fn candidate_features_feed_selection() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    generate(d, "data", "jsonl");
    ok(d, &[
        "extract", "--candidates", "--truth", "data/truth.csv", "--out", "cand.csv", "data/user_0.jsonl",
        "data/user_1.jsonl", "data/user_2.jsonl",
    ]);
    let kept = ok(d, &["select", "--features", "cand.csv", "--out", "sel.json"]);
    let report = json(&d.join("sel.json"));
    assert_eq!(report["features"].as_array().unwrap().len(), 36);
    let listed: Vec<&str> = report["kept"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(!listed.is_empty());
    assert_eq!(kept.trim(), format!("kept: {}", listed.join(",")));

    // No ground truth: rows carry an empty context and training refuses them.
    ok(d, &["extract", "--user-id", "4", "--out", "bare.csv", "data/user_1.jsonl"]);
    let row = fs::read_to_string(d.join("bare.csv")).unwrap().lines().nth(1).unwrap().to_string();
    assert!(row.ends_with(",4,"), "{row}");
    let out = cli(d, &["train-context", "--features", "bare.csv", "--out", "ctx.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("context"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    generate(d, "a", "csv");
    generate(d, "b", "csv");
    for f in ["user_0.csv", "user_2.csv", "truth.csv", "profiles.json"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    for (dir, out) in [("a", "fa.csv"), ("b", "fb.csv")] {
        let truth = format!("{dir}/truth.csv");
        let inputs: Vec<String> = (0..3).map(|i| format!("{dir}/user_{i}.csv")).collect();
        let mut args = vec!["extract", "--truth", truth.as_str(), "--out", out];
        args.extend(inputs.iter().map(String::as_str));
        ok(d, &args);
    }
    assert_eq!(fs::read(d.join("fa.csv")).unwrap(), fs::read(d.join("fb.csv")).unwrap());

    let mut eval = vec!["evaluate", "--iterations", "2"];
    eval.extend(SMALL);
    let r1 = ok(d, &[&eval[..], &["--results-dir", "r1"]].concat());
    let r2 = ok(d, &[&eval[..], &["--results-dir", "r2"]].concat());
    assert_eq!(r1, r2);
    let csv = "evaluate_separable.csv";
    assert_eq!(fs::read(d.join("r1").join(csv)).unwrap(), fs::read(d.join("r2").join(csv)).unwrap());
    let strip = |p: &Path| {
        let mut v = json(p);
        v.as_object_mut().unwrap().remove("metadata");
        v
    };
    let js = "evaluate_separable.json";
    assert_eq!(strip(&d.join("r1").join(js)), strip(&d.join("r2").join(js)));
}

#[test]
fn evaluate_exit_code_follows_the_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let mut args = vec!["evaluate", "--iterations", "2", "--results-dir", "res"];
    args.extend(SMALL);
    let out = ok(d, &args);
    assert_eq!(out.lines().count(), 5);
    let report = json(&d.join("res/evaluate_separable.json"));
    let best = report["cells"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["device_set"] == "phone_and_watch" && c["context_mode"] == "context_aware")
        .unwrap()["rates"]["accuracy"]
        .as_f64()
        .unwrap();
    assert!(best >= 0.95);

    let strict = cli(d, &[&args[..], &["--preset", "overlapping", "--min-accuracy", "1"]].concat());
    assert_eq!(strict.status.code(), Some(1));
    assert!(stderr(&strict).contains("min_accuracy"));
    assert!(d.join("res/evaluate_overlapping.json").exists());
}

#[test]
fn invalid_values_exit_one_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cases: [(&[&str], &str); 6] = [
        (&["--rho", "-1", "evaluate"], "rho"),
        (&["--data-size", "7", "evaluate"], "data_size"),
        (&["--window-s", "0", "evaluate"], "window_s"),
        (&["--alpha", "1.5", "evaluate"], "alpha"),
        (&["evaluate", "--iterations", "0"], "iterations"),
        (&["masquerade", "--lambdas", "0,1.5"], "lambdas"),
    ];
    for (args, field) in cases {
        let out = cli(d, args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(stderr(&out).contains(field), "{args:?}: {}", stderr(&out));
    }

    fs::write(d.join("bad.toml"), "rhoo = 2\n").unwrap();
    let out = cli(d, &["--config", "bad.toml", "evaluate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("rhoo"));

    fs::write(d.join("neg.toml"), "epsilon_cs = -0.1\n").unwrap();
    let out = cli(d, &["--config", "neg.toml", "evaluate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("epsilon_cs"));
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [&["frobnicate"][..], &["run", "--bank", "b.json"], &["evaluate", "--preset", "noisy"], &[]] {
        assert_eq!(cli(tmp.path(), args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn flags_beat_environment_beats_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("c.toml"), "rho = 2.0\nseed = 5\n[paths]\nresults_dir = \"from_file\"\n").unwrap();
    let mut base = vec!["--config", "c.toml", "evaluate", "--iterations", "2"];
    base.extend(SMALL);

    ok(d, &base);
    let r = json(&d.join("from_file/evaluate_separable.json"));
    assert_eq!(r["config"]["rho"], 2.0);
    assert_eq!(r["config"]["seed"], 5);

    let out = Command::new(BIN)
        .current_dir(d)
        .env("IMPLICIT_AUTH_RESULTS_DIR", "from_env")
        .args(&base)
        .args(["--rho", "3"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(json(&d.join("from_env/evaluate_separable.json"))["config"]["rho"], 3.0);

    let out = Command::new(BIN)
        .current_dir(d)
        .env("IMPLICIT_AUTH_RESULTS_DIR", "from_env")
        .args(&base)
        .args(["--results-dir", "from_flag"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(d.join("from_flag/evaluate_separable.json").exists());
}

#[test]
fn sweeps_and_masquerade_write_results() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let mut w = vec!["sweep", "--kind", "window", "--values", "2,6,10", "--iterations", "2", "--results-dir", "res"];
    w.extend(SMALL);
    let out = ok(d, &w);
    assert_eq!(out.lines().count(), 3);
    let csv = fs::read_to_string(d.join("res/sweep_window.csv")).unwrap();
    assert!(csv.starts_with("window_s,frr,far,accuracy"));
    assert_eq!(csv.lines().count(), 4);

    let mut n = vec!["sweep", "--kind", "data", "--values", "40,80", "--iterations", "2", "--results-dir", "res"];
    n.extend(SMALL);
    ok(d, &n);
    assert_eq!(json(&d.join("res/sweep_data.json"))["points"].as_array().unwrap().len(), 2);

    // At the two extremes the attackers are always rejected or always
    // accepted, so survival matches p^n exactly.
    let mut m = vec!["masquerade", "--lambdas", "0,1", "--sessions", "2", "--results-dir", "res"];
    m.extend(SMALL);
    let out = ok(d, &m);
    assert!(out.contains("lambda=0 p_hat=0.0000") && out.contains("lambda=1 p_hat=1.0000"), "{out}");
    let report = json(&d.join("res/masquerade.json"));
    assert_eq!(report["curves"].as_array().unwrap().len(), 2);
    assert!(fs::read_to_string(d.join("res/masquerade.csv")).unwrap().starts_with("lambda,n,survival"));
}

#[test]
fn configured_directories_are_the_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("c.toml"), "[paths]\ndata_dir = \"raw\"\nmodel_dir = \"models\"\n").unwrap();
    let c = ["--config", "c.toml"];
    ok(d, &[&c[..], &["generate", "--users", "3", "--per-context-s", "300", "--block-s", "150"]].concat());
    assert!(d.join("raw/user_2.csv").exists());
    ok(d, &[
        "extract", "--truth", "raw/truth.csv", "--out", "feat.csv", "raw/user_0.csv", "raw/user_1.csv", "raw/user_2.csv",
    ]);
    ok(d, &[&c[..], &["train-context", "--features", "feat.csv", "--trees", "10"]].concat());
    assert!(d.join("models/context.json").exists());
    ok(d, &[&c[..], &["train-auth", "--features", "feat.csv", "--data-size", "100"]].concat());
    ok(d, &[&c[..], &["train-auth", "--features", "feat.csv", "--context", "stationary", "--device-set", "phone"]].concat());
    assert!(d.join("models/bank.json").exists());
    assert!(d.join("models/stationary_phone_only.json").exists());

    let from_dir = ok(d, &[&c[..], &["run", "--input", "raw/user_1.csv"]].concat());
    let from_file = ok(d, &["run", "--bank", "models/bank.json", "--input", "raw/user_1.csv"]);
    assert_eq!(from_dir, from_file);
    assert_eq!(log_lines(&from_dir).len(), 100);
}
