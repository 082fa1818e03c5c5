use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kf_core::KernelExpr;

fn kf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn only_subdir(dir: &Path) -> PathBuf {
    let entries: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(entries.len(), 1, "{entries:?}");
    entries[0].clone()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn gram_writes_one_kernel_per_descriptor() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&kf(&[
        "synth", "--kind", "informative", "--views", "5", "--per-class", "8", "--seed", "2",
        "--out", p(&data),
    ]));
    let config = data.join("run.toml");
    let first = dir.path().join("k1");
    let second = dir.path().join("k2");
    ok(&kf(&["gram", "-c", p(&config), "--out", p(&first)]));
    ok(&kf(&["gram", "-c", p(&config), "--out", p(&second)]));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["kernels"].as_array().unwrap().len(), 5);
    assert_eq!(manifest["items"], 24);
    for k in 1..=5 {
        let name = format!("kernels/view{k}.kgm");
        assert_eq!(fs::read(first.join(&name)).unwrap(), fs::read(second.join(&name)).unwrap());
    }
    assert_eq!(
        fs::read(first.join("manifest.json")).unwrap(),
        fs::read(second.join("manifest.json")).unwrap()
    );
}

#[test]
fn gram_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    fs::write(&one, "0.5,1.0,0\n").unwrap();
    let out = kf(&["gram", "--seed", "1", "--set", &format!("input.features=[\"{}\"]", p(&one))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));

    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, "0,0\n1,1\n2,0\n").unwrap();
    fs::write(&b, "0,0\n1,1\n").unwrap();
    let out = kf(&[
        "gram", "--seed", "1", "--out", p(&dir.path().join("o")), "--set",
        &format!("input.features=[\"{}\", \"{}\"]", p(&a), p(&b)),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("a.csv") && err.contains("b.csv"), "{err}");
}

#[test]
fn config_errors_exit_with_two() {
    let out = kf(&["compare", "--seed", "1", "--set", "gp.populaton_size=5"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[gp]\npopulation_size = 10\n").unwrap();
    let out = kf(&["evolve", "-c", p(&cfg)]);
    assert_eq!(out.status.code(), Some(2), "seed must be required");
}

#[test]
fn evolve_on_a_single_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&kf(&[
        "synth", "--kind", "informative", "--views", "1", "--per-class", "12", "--seed", "4",
        "--out", p(&data),
    ]));
    let runs = dir.path().join("runs");
    let config = data.join("run.toml");
    let args = [
        "evolve", "-c", p(&config), "--out", p(&runs), "--set", "protocol.per_class_train=6",
        "--set", "protocol.per_class_val=2", "--set", "gp.population_size=6", "--set", "gp.max_generations=2",
    ];
    let stdout = ok(&kf(&args));
    assert!(stdout.contains("best expression: K1"), "{stdout}");
    let run = only_subdir(&runs);
    let best = fs::read_to_string(run.join("best_expr.txt")).unwrap();
    assert_eq!(KernelExpr::parse(best.trim()).unwrap(), KernelExpr::leaf(0));
    assert_eq!(
        listing(&run),
        ["best_expr.txt", "config.json", "evolution.csv", "model.json", "result.json", "split.json"]
    );
}

#[test]
fn compare_with_one_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&kf(&["synth", "--per-class", "12", "--seed", "3", "--out", p(&data)]));
    let small = [
        "--set", "protocol.per_class_train=6", "--set", "protocol.per_class_val=2", "--set",
        "protocol.repeats=1", "--set", "gp.population_size=8", "--set", "gp.max_generations=2",
    ];
    let config = data.join("run.toml");
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let mut args = vec!["compare", "-c", p(&config), "--out", p(&out_dir)];
        args.extend(small);
        let stdout = ok(&kf(&args));
        for m in ["addition", "best_single", "evolved"] {
            assert!(stdout.contains(m), "{stdout}");
        }
        let run = only_subdir(&out_dir);
        assert!(fs::read_to_string(run.join("summary.txt")).unwrap().contains("±0.00"));
        runs.push(run);
    }
    assert_eq!(listing(&runs[0]), listing(&runs[1]));
    assert_eq!(
        listing(&runs[0]),
        ["accuracy.csv", "binary.csv", "evolution", "generations.csv", "iterations.csv", "report.json", "summary.txt"]
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(runs[0].join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "kf-report-1");
    assert_eq!(report["methods"].as_array().unwrap().len(), 3);
}

#[test]
fn retrieve_prints_ranked_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&kf(&["synth", "--per-class", "5", "--seed", "8", "--out", p(&data)]));
    let idx_dir = dir.path().join("idx");
    ok(&kf(&["index", "-c", p(&data.join("run.toml")), "--out", p(&idx_dir)]));
    let index = idx_dir.join("index.kgm");
    let stdout = ok(&kf(&["retrieve", "--index", p(&index), "--item", "item0002", "--k", "3"]));
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "rank,item_id,score");
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().skip(1).all(|l| !l.contains("item0002,")));

    let out = kf(&["retrieve", "--index", p(&index), "--item", "item002", "--k", "3"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("item0002"));

    let out = kf(&["retrieve", "--index", p(&index), "--item", "item0002", "--k", "15"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn inspect_pretty_prints() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("best.txt");
    fs::write(&file, "(+ (* K1 K1) K5)\n").unwrap();
    let stdout = ok(&kf(&["inspect", p(&file)]));
    assert!(stdout.contains("canonical   (+ (* K1 K1) K5)"));
    assert!(stdout.contains("depth       3"));
    let out = kf(&["inspect", "--expr", "(+ K1"]);
    assert_eq!(out.status.code(), Some(3));
}
