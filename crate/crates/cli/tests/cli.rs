use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mcgrad::bench::{generate_synthetic, SyntheticSpec};
use serde_json::{json, Value};
use tempfile::TempDir;

fn mcgrad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcgrad"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Writes feature columns, `label` and `score` (the generator's base score).
fn write_synthetic(path: &Path, spec: &SyntheticSpec) {
    let (data, base, _) = generate_synthetic(spec).unwrap();
    let mut text = String::new();
    let names = data.feature_names().join(",");
    writeln!(text, "{names},label,score").unwrap();
    for i in 0..data.n_rows() {
        for j in 0..data.n_cols() {
            write!(text, "{},", data.features().value(i, j)).unwrap();
        }
        writeln!(text, "{},{}", data.labels()[i], base[i]).unwrap();
    }
    fs::write(path, text).unwrap();
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(spec: &SyntheticSpec) -> Self {
        let dir = TempDir::new().unwrap();
        write_synthetic(&dir.path().join("data.csv"), spec);
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    /// A config with relative paths, resolved against the workspace.
    fn config(&self, name: &str, extra: Value) -> String {
        let mut doc = json!({
            "data": {"path": "data.csv", "label_column": "label", "ignore": ["score"]},
            "output_dir": "out",
        });
        for (k, v) in extra.as_object().unwrap() {
            doc[k] = v.clone();
        }
        fs::write(self.path(name), serde_json::to_string_pretty(&doc).unwrap()).unwrap();
        self.s(name)
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.path(name)).unwrap()).unwrap()
    }

    fn csv(&self, name: &str) -> Vec<Vec<String>> {
        fs::read_to_string(self.path(name))
            .unwrap()
            .lines()
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect()
    }
}

fn external_base() -> Value {
    json!({"kind": "external_scores", "params": {"column": "score"}})
}

#[test]
fn fit_writes_outputs_and_predict_reproduces_them() {
    let ws = Workspace::new(&SyntheticSpec::segment_bias(4000, 1.0, 1));
    let cfg = ws.config("run.json", json!({}));
    ok(&mcgrad(&["fit", &cfg, "--calibrator.params.max_rounds=3"]));
    for f in [
        "model.json",
        "base_model.json",
        "config.resolved.json",
        "report.json",
        "report.csv",
        "groups.csv",
        "trace.csv",
        "predictions.csv",
    ] {
        assert!(ws.path("out").join(f).exists(), "missing {f}");
    }
    let resolved = ws.json("out/config.resolved.json");
    assert_eq!(resolved["calibrator"]["params"]["max_rounds"], 3);

    let report = ws.json("out/report.json");
    assert_eq!(report["calibrator"], "mcgrad");
    for section in ["base", "calibrated"] {
        for key in [
            "n",
            "ecce",
            "sigma",
            "ecce_sigma",
            "mce",
            "mce_absolute",
            "logloss",
            "prauc",
            "auroc",
            "brier",
            "ece",
            "per_group",
        ] {
            assert!(report[section].get(key).is_some(), "{section}.{key}");
        }
    }
    assert_eq!(
        report["n_train"].as_u64().unwrap() + report["n_test"].as_u64().unwrap(),
        4000
    );

    // accepted selection rounds strictly improve validation loss
    let trace = ws.csv("out/trace.csv");
    assert_eq!(trace[0][0], "phase");
    let select: Vec<_> = trace[1..].iter().filter(|r| r[0] == "select").collect();
    assert!(select.len() >= 2 && select.len() <= 4);
    let mut prev = f64::INFINITY;
    for r in select.iter().filter(|r| r[6] == "true") {
        let v: f64 = r[3].parse().unwrap();
        assert!(v < prev);
        prev = v;
    }
    // round 0 is the starting point, not a fitted round
    assert_eq!(select[0][1], "0");
    let accepted = select[1..].iter().filter(|r| r[6] == "true").count();
    let refit = trace[1..].iter().filter(|r| r[0] == "refit").count();
    assert_eq!(accepted, refit);

    let pred = ws.s("pred.csv");
    ok(&mcgrad(&[
        "predict",
        "--model",
        &ws.s("out/model.json"),
        "--data",
        &ws.s("data.csv"),
        "--out",
        &pred,
    ]));
    let all = ws.csv("pred.csv");
    assert_eq!(all.len(), 4001);
    let held_out = ws.csv("out/predictions.csv");
    assert_eq!(held_out[0], all[0]);
    for row in &held_out[1..] {
        let i: usize = row[0].parse().unwrap();
        assert_eq!(row, &all[i + 1], "row {i}");
    }
}

#[test]
fn fit_is_reproducible() {
    let ws = Workspace::new(&SyntheticSpec::segment_bias(3000, 1.0, 2));
    let cfg = ws.config("run.json", json!({"base": external_base()}));
    ok(&mcgrad(&[
        "fit",
        &cfg,
        "--max-rounds",
        "2",
        "--output-dir",
        &ws.s("a"),
    ]));
    ok(&mcgrad(&[
        "fit",
        &cfg,
        "--max-rounds",
        "2",
        "--output-dir",
        &ws.s("b"),
    ]));
    for f in [
        "model.json",
        "report.json",
        "report.csv",
        "groups.csv",
        "trace.csv",
        "predictions.csv",
    ] {
        let a = fs::read(ws.path("a").join(f)).unwrap();
        let b = fs::read(ws.path("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn none_calibrator_omits_calibrated_section() {
    let ws = Workspace::new(&SyntheticSpec::calibrated(2000, 3));
    let cfg = ws.config("run.json", json!({"calibrator": {"kind": "none"}}));
    ok(&mcgrad(&["fit", &cfg]));
    let report = ws.json("out/report.json");
    assert!(report.get("calibrated").is_none());
    assert!(report["base"]["ecce"].is_number());
    assert!(!ws.path("out/trace.csv").exists());
    let rows = ws.csv("out/predictions.csv");
    for r in &rows[1..] {
        assert_eq!(r[1], r[2]);
    }
}

#[test]
fn zero_rounds_leaves_scores_unchanged() {
    let ws = Workspace::new(&SyntheticSpec::calibrated(20_000, 1));
    let cfg = ws.config("run.json", json!({"base": external_base()}));
    ok(&mcgrad(&["fit", &cfg]));
    let trace = ws.csv("out/trace.csv");
    assert!(trace[1..].iter().all(|r| r[0] == "select"));
    assert!(trace[2..].iter().all(|r| r[6] == "false"));
    let rows = ws.csv("out/predictions.csv");
    for r in &rows[1..] {
        assert_eq!(r[1], r[2], "row {}", r[0]);
    }
}

#[test]
fn other_calibrators_fit() {
    let ws = Workspace::new(&SyntheticSpec::segment_bias(2000, 1.0, 4));
    for kind in ["platt", "isotonic", "hkrr", "dfmc"] {
        let cfg = ws.config(
            "run.json",
            json!({"base": external_base(), "calibrator": {"kind": kind}}),
        );
        ok(&mcgrad(&["fit", &cfg, "--output-dir", &ws.s(kind)]));
        let report = ws.json(&format!("{kind}/report.json"));
        assert_eq!(report["calibrator"], kind);
        assert!(report["calibrated"]["logloss"].is_number());
    }
}

#[test]
fn config_errors_exit_2_without_output() {
    let ws = Workspace::new(&SyntheticSpec::calibrated(500, 5));
    fs::write(ws.path("bad.json"), "{\"data\": ").unwrap();
    let out = mcgrad(&["fit", &ws.s("bad.json")]);
    assert_eq!(code(&out), 2);
    assert!(!ws.path("out").exists());

    let cfg = ws.config("unknown.json", json!({"colour": "blue"}));
    assert_eq!(code(&mcgrad(&["fit", &cfg])), 2);
    let cfg = ws.config("run.json", json!({}));
    assert_eq!(
        code(&mcgrad(&["fit", &cfg, "--calibrator.params.bogus=1"])),
        2
    );
    assert_eq!(code(&mcgrad(&["fit", &cfg, "--split.valid_fraction=2"])), 2);
    assert!(!ws.path("out").exists());
}

#[test]
fn data_errors_exit_3() {
    let ws = Workspace::new(&SyntheticSpec::calibrated(1000, 6));
    let cfg = ws.config(
        "run.json",
        json!({"data": {"path": "data.csv", "label_column": "y"}}),
    );
    assert_eq!(code(&mcgrad(&["fit", &cfg])), 3);
    assert!(!ws.path("out").exists());

    let cfg = ws.config("run.json", json!({"calibrator": {"kind": "platt"}}));
    ok(&mcgrad(&["fit", &cfg]));
    // drop the first feature column
    let text = fs::read_to_string(ws.path("data.csv")).unwrap();
    let cut: String = text
        .lines()
        .map(|l| l.split_once(',').unwrap().1.to_string() + "\n")
        .collect();
    fs::write(ws.path("cut.csv"), cut).unwrap();
    let out = mcgrad(&[
        "predict",
        "--model",
        &ws.s("out/model.json"),
        "--data",
        &ws.s("cut.csv"),
        "--out",
        &ws.s("p.csv"),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn evaluate_perfect_scores() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("s.csv");
    let mut text = String::from("label,calibrated_score\n");
    for i in 0..200 {
        let y = (i * 7 % 3 == 0) as u8;
        writeln!(text, "{y},{y}").unwrap();
    }
    fs::write(&path, text).unwrap();
    let out = dir.path().join("eval");
    let p = path.display().to_string();
    ok(&mcgrad(&[
        "evaluate",
        "--scores",
        &p,
        "--labels",
        &p,
        "--out",
        &out.display().to_string(),
    ]));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["ece"], 0.0);
    assert_eq!(report["brier"], 0.0);
    assert_eq!(report["n"], 200);
    assert!(out.join("report.csv").exists());

    // misaligned label file
    let short = dir.path().join("short.csv");
    fs::write(&short, "label\n1\n0\n").unwrap();
    let res = mcgrad(&[
        "evaluate",
        "--scores",
        &p,
        "--labels",
        &short.display().to_string(),
        "--out",
        &dir.path().join("e2").display().to_string(),
    ]);
    assert_eq!(code(&res), 3);
}

#[test]
fn evaluate_fit_predictions_with_groups() {
    let ws = Workspace::new(&SyntheticSpec::segment_bias(3000, 1.0, 7));
    let cfg = ws.config("run.json", json!({"base": external_base()}));
    ok(&mcgrad(&["fit", &cfg, "--max-rounds", "1"]));
    ok(&mcgrad(&[
        "predict",
        "--model",
        &ws.s("out/model.json"),
        "--data",
        &ws.s("data.csv"),
        "--out",
        &ws.s("pred.csv"),
    ]));
    fs::write(ws.path("groups.json"), r#"{"mode": "unspecified"}"#).unwrap();
    ok(&mcgrad(&[
        "evaluate",
        "--scores",
        &ws.s("pred.csv"),
        "--data",
        &ws.s("data.csv"),
        "--groups",
        &ws.s("groups.json"),
        "--out",
        &ws.s("eval"),
    ]));
    let report = ws.json("eval/report.json");
    assert!(report["mce"].is_number());
    assert!(!report["per_group"].as_array().unwrap().is_empty());
    assert!(ws.csv("eval/groups.csv").len() > 1);
}

#[test]
fn overrides_rejected_outside_fit() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().display().to_string();
    let out = mcgrad(&["bench", "--out", &d, "--calibrator.params.max_rounds=1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn small_bench_writes_tables() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bench");
    ok(&mcgrad(&[
        "bench",
        "--out",
        &out.display().to_string(),
        "--seeds",
        "1",
        "--rows",
        "2000",
    ]));
    for f in ["results.csv", "ranks.csv", "ablation.csv"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert!(text.lines().count() > 1, "{f} is empty");
    }
}
