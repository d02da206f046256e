use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL_CONFIG: &str = r#"{"hidden_widths": [8, 8], "epochs": 20, "learning_rate": 0.01}"#;

fn wtest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wtest"))
        .args(args)
        .env_remove("WTEST_THREADS")
        .output()
        .expect("spawn wtest")
}

fn ok(args: &[&str]) -> String {
    let out = wtest(args);
    assert!(
        out.status.success(),
        "wtest {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

struct Workdir {
    dir: TempDir,
}

impl Workdir {
    fn new() -> Self {
        let w = Self {
            dir: TempDir::new().unwrap(),
        };
        fs::write(w.path("config.json"), SMALL_CONFIG).unwrap();
        w
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }

    fn gen(&self, name: &str, dist: &str, d: usize, n: usize, seed: u64) -> String {
        let out = self.arg(name);
        ok(&[
            "gen",
            "--dist",
            dist,
            "--d",
            &d.to_string(),
            "--n",
            &n.to_string(),
            "--seed",
            &seed.to_string(),
            "--out",
            &out,
        ]);
        out
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn schema() -> jsonschema::Validator {
    let text =
        fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json"))
            .unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(value: &Value) {
    let validator = schema();
    let errors: Vec<String> = validator
        .iter_errors(value)
        .map(|e| e.to_string())
        .collect();
    assert!(
        errors.is_empty(),
        "schema violations: {errors:?}\n{value:#}"
    );
}

#[test]
fn exact_on_identical_files_prints_zero() {
    let w = Workdir::new();
    let x = w.gen("x.csv", "gaussian", 2, 30, 1);
    assert_eq!(ok(&["exact", "--x", &x, "--y", &x]).trim(), "0.0");
}

#[test]
fn exact_matches_hand_value() {
    let w = Workdir::new();
    fs::write(w.path("a.csv"), "0,0\n").unwrap();
    fs::write(w.path("b.csv"), "3,4\n").unwrap();
    let out = ok(&["exact", "--x", &w.arg("a.csv"), "--y", &w.arg("b.csv")]);
    assert_eq!(out.trim(), "5.0");
}

#[test]
fn one_sample_with_reference_equal_to_data_accepts() {
    let w = Workdir::new();
    let x = w.gen("x.csv", "gaussian", 2, 60, 4);
    let out = w.arg("report.json");
    ok(&[
        "one-sample",
        "--data",
        &x,
        "--ref",
        &x,
        "--alpha",
        "0.05",
        "--T",
        "20",
        "--config",
        &w.arg("config.json"),
        "--seed",
        "7",
        "--out",
        &out,
    ]);
    let report = read_json(Path::new(&out));
    assert_eq!(report["report"]["decision"], "Accept");
    assert_eq!(report["manifest"]["command"], "one-sample");
    assert_eq!(report["manifest"]["inputs"].as_array().unwrap().len(), 3);
    assert_valid(&report);
}

#[test]
fn malformed_row_exits_2_with_line_number() {
    let w = Workdir::new();
    fs::write(w.path("bad.csv"), "x0,x1\n0.1,0.2\n0.3,oops\n").unwrap();
    let out = wtest(&["exact", "--x", &w.arg("bad.csv"), "--y", &w.arg("bad.csv")]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn capacity_error_exits_3() {
    let w = Workdir::new();
    let x = w.gen("x.csv", "gaussian", 2, 20, 1);
    let out = wtest(&["exact", "--x", &x, "--y", &x, "--budget", "10"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_config_field_exits_2() {
    let w = Workdir::new();
    let x = w.gen("x.csv", "gaussian", 1, 20, 1);
    fs::write(w.path("bad.json"), r#"{"hidden": [4]}"#).unwrap();
    let out = wtest(&[
        "dual",
        "--x",
        &x,
        "--y",
        &x,
        "--config",
        &w.arg("bad.json"),
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_outside_unit_box_is_rejected_by_tests() {
    let w = Workdir::new();
    fs::write(w.path("raw.csv"), "0.5\n1.5\n0.2\n").unwrap();
    let out = wtest(&[
        "one-sample",
        "--data",
        &w.arg("raw.csv"),
        "--ref",
        &w.arg("raw.csv"),
        "--alpha",
        "0.05",
        "--T",
        "10",
        "--seed",
        "1",
        "--out",
        &w.arg("r.json"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!w.path("r.json").exists());
}

#[test]
fn gen_header_is_opt_in() {
    let w = Workdir::new();
    let plain = w.gen("plain.csv", "circle-plain", 2, 5, 3);
    let text = fs::read_to_string(&plain).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().next().unwrap().parse::<f64>().is_err()); // two columns
    assert!(text
        .lines()
        .next()
        .unwrap()
        .split(',')
        .all(|v| v.parse::<f64>().is_ok()));

    let headed = w.arg("headed.csv");
    ok(&[
        "gen",
        "--dist",
        "circle-plain",
        "--d",
        "2",
        "--n",
        "5",
        "--seed",
        "3",
        "--header",
        "--out",
        &headed,
    ]);
    let text = fs::read_to_string(&headed).unwrap();
    assert_eq!(text.lines().next(), Some("x0,x1"));
    assert_eq!(
        text.lines().skip(1).collect::<Vec<_>>(),
        fs::read_to_string(&plain)
            .unwrap()
            .lines()
            .collect::<Vec<_>>()
    );
}

#[test]
fn randomized_commands_are_reproducible_across_thread_caps() {
    let w = Workdir::new();
    let x = w.gen("x.csv", "gaussian", 2, 40, 9);
    let again = w.gen("x2.csv", "gaussian", 2, 40, 9);
    assert_eq!(fs::read(&x).unwrap(), fs::read(&again).unwrap());

    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = w.arg(&format!("draws{threads}.csv"));
        ok(&[
            "--threads",
            threads,
            "bootstrap",
            "--data",
            &x,
            "--T",
            "12",
            "--config",
            &w.arg("config.json"),
            "--seed",
            "5",
            "--out",
            &out,
        ]);
        outputs.push(fs::read_to_string(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let lines: Vec<&str> = outputs[0].lines().collect();
    assert_eq!(lines[0], "draw");
    assert_eq!(lines.len(), 13);

    let y = w.gen("y.csv", "gaussian", 2, 40, 10);
    let mut reports = Vec::new();
    for threads in ["1", "2"] {
        let out = w.arg(&format!("mmd{threads}.json"));
        ok(&[
            "--threads",
            threads,
            "mmd",
            "--x",
            &x,
            "--y",
            &y,
            "--alpha",
            "0.05",
            "--permutations",
            "60",
            "--seed",
            "2",
            "--out",
            &out,
        ]);
        reports.push(read_json(Path::new(&out))["report"].clone());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn json_outputs_validate_against_schema() {
    let w = Workdir::new();
    let x = w.gen("x.csv", "gaussian", 2, 40, 1);
    let y = w.gen("y.csv", "circle-shift", 2, 40, 2);
    let cfg = w.arg("config.json");

    let two = w.arg("two.json");
    ok(&[
        "two-sample",
        "--x",
        &x,
        "--y",
        &y,
        "--alpha",
        "0.1",
        "--T",
        "10",
        "--config-x",
        &cfg,
        "--config-y",
        &cfg,
        "--seed",
        "3",
        "--out",
        &two,
    ]);
    let two = read_json(Path::new(&two));
    assert_eq!(two["report"]["S"].as_array().unwrap().len(), 2);
    assert_valid(&two);

    let ci = w.arg("ci.json");
    ok(&[
        "ci", "--data", &x, "--ref", &y, "--alpha", "0.1", "--T", "10", "--config", &cfg, "--seed",
        "3", "--out", &ci,
    ]);
    let ci = read_json(Path::new(&ci));
    assert!(ci["report"]["lo"].as_f64().unwrap() <= ci["report"]["hi"].as_f64().unwrap());
    assert_valid(&ci);

    let mmd = w.arg("mmd.json");
    ok(&[
        "mmd",
        "--x",
        &x,
        "--y",
        &y,
        "--alpha",
        "0.05",
        "--permutations",
        "50",
        "--seed",
        "1",
        "--out",
        &mmd,
    ]);
    assert_valid(&read_json(Path::new(&mmd)));

    let dual: Value = serde_json::from_str(&ok(&[
        "dual", "--x", &x, "--y", &y, "--config", &cfg, "--seed", "1",
    ]))
    .unwrap();
    assert!(dual["report"]["lipschitz_certificate"].as_f64().unwrap() <= 1.0 + 1e-9);
    assert_valid(&dual);

    let mut broken = two.clone();
    broken["report"]["extra"] = Value::from(1);
    assert!(!schema().is_valid(&broken));
}

#[test]
fn budget_prints_window() {
    let out: Value = serde_json::from_str(&ok(&[
        "budget", "--n", "1000000", "--d", "2", "--S", "10000",
    ]))
    .unwrap();
    assert_eq!(out["admissible"], false);
    let lower = out["lower"].as_f64().unwrap();
    assert!((lower - 6437.15).abs() < 0.01, "{lower}");
}

#[test]
fn diagnostic_csvs_have_expected_columns() {
    let w = Workdir::new();
    let qq = w.arg("qq.csv");
    ok(&[
        "qq",
        "--dist",
        "gaussian",
        "--d",
        "1",
        "--n",
        "30",
        "--reps",
        "4",
        "--config",
        &w.arg("config.json"),
        "--seed",
        "1",
        "--out",
        &qq,
    ]);
    let text = fs::read_to_string(&qq).unwrap();
    assert_eq!(text.lines().next(), Some("reference,bootstrap"));
    assert_eq!(text.lines().count(), 5);

    let ac = w.arg("ac.csv");
    ok(&[
        "diag",
        "anti-concentration",
        "--dist",
        "gaussian",
        "--n",
        "30",
        "--reps",
        "50",
        "--deltas",
        "0.05,0.1",
        "--out",
        &ac,
    ]);
    let text = fs::read_to_string(&ac).unwrap();
    assert_eq!(text.lines().next(), Some("delta,r,c_r"));
    assert!(text.lines().count() > 2);
}
