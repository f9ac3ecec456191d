use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_asgbdt"));
    c.env_remove("ASGBDT_OUT_DIR").env("RUST_LOG", "off");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}\nstdout:\n{}\nstderr:\n{}", o.status.code(), stdout(&o), stderr(&o));
    o
}

/// `key=value` lines.
fn kv(text: &str) -> BTreeMap<String, String> {
    text.lines().filter_map(|l| l.split_once('=')).map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &TempDir, kind: &str, rows: usize, seed: u64) -> PathBuf {
    let p = dir.path().join(format!("{kind}_{rows}_{seed}.svm"));
    ok(run(&["gen-data", kind, "--out", s(&p), "--rows", &rows.to_string(), "--seed", &seed.to_string()]));
    p
}

fn train(data: &Path, out: &Path, extra: &[&str]) -> BTreeMap<String, String> {
    let mut args = vec!["train", "--train", s(data), "--out", s(out)];
    args.extend_from_slice(extra);
    kv(&stdout(&ok(run(&args))))
}

#[test]
fn train_writes_forest_history_and_echo() {
    let d = TempDir::new().unwrap();
    let data = gen(&d, "highdiv", 150, 1);
    let out = d.path().join("run");
    let r = train(&data, &out, &["--trees", "12", "--workers", "3", "--mode", "virtual"]);
    assert_eq!(r["updates"], "12");
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 13);
    assert!(history.starts_with("update,worker,staleness,train_loss,test_loss,accuracy,wall_ms"));
    assert!(out.join("forest.txt").exists());
    let echo = fs::read_to_string(out.join("run.toml")).unwrap();
    assert!(echo.contains("n_trees = 12"), "{echo}");
}

#[test]
fn virtual_runs_are_byte_identical() {
    let d = TempDir::new().unwrap();
    let data = gen(&d, "highdiv", 150, 2);
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    let extra = ["--trees", "15", "--workers", "4", "--rate", "0.6", "--set", "train.jitter_ticks=5"];
    train(&data, &a, &extra);
    train(&data, &b, &extra);
    for f in ["history.csv", "forest.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_and_overrides() {
    let d = TempDir::new().unwrap();
    let data = gen(&d, "highdiv", 120, 3);
    let cfg = d.path().join("run.toml");
    fs::write(&cfg, format!("[data]\ntrain = {:?}\ntest_fraction = 0.25\n[train]\nn_trees = 9\nmode = \"serial\"\n", s(&data)))
        .unwrap();
    let out = d.path().join("o");
    let r = kv(&stdout(&ok(run(&["train", "--config", s(&cfg), "--set", "train.step=0.2", "--out", s(&out)]))));
    assert_eq!(r["updates"], "9");
    assert!(r.contains_key("test_accuracy"));
    assert!(fs::read_to_string(out.join("run.toml")).unwrap().contains("step = 0.2"));
}

#[test]
fn missing_input_exits_2_and_names_the_path() {
    let d = TempDir::new().unwrap();
    let missing = d.path().join("nope.svm");
    let o = run(&["train", "--train", s(&missing), "--out", s(&d.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.svm"), "{}", stderr(&o));

    let o = run(&["stats", "--data", s(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn malformed_input_exits_2() {
    let d = TempDir::new().unwrap();
    let bad = d.path().join("bad.svm");
    fs::write(&bad, "1 1:0.5\n3 2:1\n").unwrap();
    let o = run(&["stats", "--data", s(&bad)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn eval_on_training_data_matches_final_train_loss() {
    let d = TempDir::new().unwrap();
    let data = gen(&d, "highdiv", 200, 4);
    let out = d.path().join("run");
    let r = train(&data, &out, &["--trees", "20", "--workers", "2"]);
    let e = kv(&stdout(&ok(run(&["eval", "--forest", s(&out.join("forest.txt")), "--data", s(&data)]))));
    assert_eq!(e.keys().cloned().collect::<Vec<_>>(), ["accuracy", "auc", "loss"]);
    let (a, b): (f64, f64) = (e["loss"].parse().unwrap(), r["train_loss"].parse().unwrap());
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
}

#[test]
fn eval_rejects_empty_forest_and_wider_data() {
    let d = TempDir::new().unwrap();
    let data = gen(&d, "lowdiv", 0, 0);
    let empty = d.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    let o = run(&["eval", "--forest", s(&empty), "--data", s(&data)]);
    assert_eq!(o.status.code(), Some(2));

    let out = d.path().join("run");
    train(&data, &out, &["--trees", "3"]);
    let wide = d.path().join("wide.svm");
    fs::write(&wide, "1 1:1 40:2\n0 2:1\n").unwrap();
    let o = run(&["eval", "--forest", s(&out.join("forest.txt")), "--data", s(&wide)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dimension mismatch"), "{}", stderr(&o));
}

#[test]
fn stats_at_full_rate_sees_every_sample() {
    let d = TempDir::new().unwrap();
    let data = gen(&d, "lowdiv", 0, 0);
    let r = kv(&stdout(&ok(run(&["stats", "--data", s(&data), "--rate", "1", "--trials", "10"]))));
    assert_eq!(r["omega"], "3");
    assert_eq!(r["delta"], "1");
    assert_eq!(r["rho"], "1");
}

#[test]
fn theory_report_and_tau_sweep() {
    let r = kv(&stdout(&ok(run(&["theory", "--c", "1", "--lambda", "1", "--omega", "10", "--tau", "0"]))));
    let v: f64 = r["v"].parse().unwrap();
    assert!((v - 0.0025).abs() < 1e-15, "{v}");
    assert_eq!(r["worker_bound"], "NA");

    let r = kv(&stdout(&ok(run(&["theory", "--t-build", "10", "--t-comm", "2"]))));
    assert_eq!(r["worker_bound"], "5");

    let d = TempDir::new().unwrap();
    let csv = d.path().join("tau.csv");
    ok(run(&["theory", "--tau-sweep", "0:16", "--csv", s(&csv)]));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("tau,v,t,c1,c2,r,diameter"));
    assert_eq!(text.lines().count(), 18);

    assert_eq!(run(&["theory", "--tau-sweep", "9:3"]).status.code(), Some(2));
    assert_eq!(run(&["theory", "--rho", "0"]).status.code(), Some(2));
}

#[test]
fn theory_estimates_from_data() {
    let d = TempDir::new().unwrap();
    let data = gen(&d, "highdiv", 100, 5);
    let csv = d.path().join("rates.csv");
    ok(run(&["theory", "--data", s(&data), "--rate-sweep", "0.2,0.8", "--trials", "20", "--csv", s(&csv)]));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    let r = kv(&stdout(&ok(run(&["theory", "--data", s(&data), "--rate", "1", "--trials", "5"]))));
    assert_eq!(r["omega"], "100");
}

#[test]
fn single_value_sweep_matches_train() {
    let d = TempDir::new().unwrap();
    let data = gen(&d, "highdiv", 120, 6);
    let common = ["--trees", "10", "--rate", "0.5"];
    let t = d.path().join("t");
    train(&data, &t, &[&common[..], &["--workers", "3"]].concat());
    let sw = d.path().join("sw");
    let mut args = vec!["sweep", "--train", s(&data), "--out", s(&sw), "--axis", "workers", "--values", "3", "--threshold", "0.3"];
    args.extend_from_slice(&common);
    let o = ok(run(&args));
    assert!(stdout(&o).starts_with("value,updates_to_threshold,final_loss"));
    assert_eq!(
        fs::read(t.join("forest.txt")).unwrap(),
        fs::read(sw.join("cell_workers_3").join("forest.txt")).unwrap()
    );
    assert!(sw.join("summary.csv").exists());
}

#[test]
fn sweep_summary_has_a_row_per_value() {
    let d = TempDir::new().unwrap();
    let data = gen(&d, "lowdiv", 0, 0);
    let sw = d.path().join("sw");
    let o = ok(run(&[
        "sweep", "--train", s(&data), "--out", s(&sw), "--trees", "30", "--axis", "rate", "--values", "0.3,1",
        "--threshold", "0.5",
    ]));
    let summary = fs::read_to_string(sw.join("summary.csv")).unwrap();
    assert_eq!(summary, stdout(&o));
    assert_eq!(summary.lines().count(), 3);
    assert_eq!(run(&["sweep", "--train", s(&data), "--axis", "depth", "--values", "1"]).status.code(), Some(2));
}

#[test]
fn output_dir_from_environment() {
    let d = TempDir::new().unwrap();
    let data = gen(&d, "lowdiv", 0, 0);
    let env_out = d.path().join("from_env");
    let o = bin()
        .args(["train", "--train", s(&data), "--trees", "2"])
        .env("ASGBDT_OUT_DIR", &env_out)
        .output()
        .unwrap();
    let o = ok(o);
    assert_eq!(kv(&stdout(&o))["out_dir"], s(&env_out));
    assert!(env_out.join("forest.txt").exists());
}

#[test]
fn threads_mode_runs() {
    let d = TempDir::new().unwrap();
    let data = gen(&d, "highdiv", 200, 7);
    let r = train(&data, &d.path().join("t"), &["--mode", "threads", "--workers", "4", "--trees", "25"]);
    assert_eq!(r["updates"], "25");
    let st: u64 = r["max_staleness"].parse().unwrap();
    assert!(st <= 8);
}

#[test]
fn gen_data_round_trips_through_stats() {
    let d = TempDir::new().unwrap();
    let data = gen(&d, "lowdiv", 0, 0);
    let r = kv(&stdout(&ok(run(&["stats", "--data", s(&data), "--rate", "0.5", "--trials", "10"]))));
    assert_eq!(r["n_samples"], "3");
    assert_eq!(run(&["gen-data", "middiv", "--out", s(&d.path().join("m.svm"))]).status.code(), Some(2));
}
