use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn docs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs")
}

fn peridyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peridyn"))
        .args(args)
        .env_remove("PERIDYN_THREADS")
        .output()
        .expect("spawn peridyn")
}

fn run_in(out: &Path, args: &[&str]) -> Output {
    let mut full = args.to_vec();
    full.extend(["--out", out.to_str().unwrap()]);
    peridyn(&full)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema: &str, instance: &Value) {
    let schema = read_json(&docs().join("schema").join(schema));
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn help_and_bad_flags() {
    assert_eq!(peridyn(&["--help"]).status.code(), Some(0));
    assert_eq!(peridyn(&[]).status.code(), Some(2));
    assert_eq!(peridyn(&["nonsense"]).status.code(), Some(2));
    assert_eq!(peridyn(&["moments", "--quad", "x"]).status.code(), Some(2));
    assert_eq!(peridyn(&["converge", "--field", "nope"]).status.code(), Some(2));
    assert_eq!(peridyn(&["converge", "--delta-series", "0.1,-1"]).status.code(), Some(2));
    assert_eq!(peridyn(&["converge", "--delta-series", "0.1", "--delta-min", "0.01"]).status.code(), Some(2));
    assert_eq!(peridyn(&["converge", "--p", "0.5"]).status.code(), Some(2));
    assert_eq!(peridyn(&["natural", "--offinterface"]).status.code(), Some(2));
    assert_eq!(peridyn(&["star", "--normal", "0,0,0"]).status.code(), Some(2));
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    for bad in [
        "{not json",
        r#"{"unknown_key": 1}"#,
        r#"{"study": "solve"}"#,
        r#"{"material": "two-phase:1,1"}"#,
        r#"{"delta_series": [0.1, 0.2]}"#,
    ] {
        fs::write(&cfg, bad).unwrap();
        let out = run_in(&tmp.path().join("o"), &["moments", "--config", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{bad}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = peridyn(&["moments", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn moments_and_kdelta_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["moments"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 3);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")));
    assert_valid("moments.schema.json", &read_json(&tmp.path().join("moments.json")));

    let out = run_in(tmp.path(), &["kdelta", "--normal", "0.6,0,0.8"]);
    assert_eq!(out.status.code(), Some(0));
    let report = read_json(&tmp.path().join("kdelta.json"));
    assert_valid("kdelta.schema.json", &report);
    assert_eq!(report["normal"], serde_json::json!([0.6, 0.0, 0.8]));
}

#[test]
fn converge_report_matches_schema_and_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["converge", "--field", "trig_smooth", "--delta-series", "0.2,0.1,0.05", "--p", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report = read_json(&tmp.path().join("converge.json"));
    assert_valid("convergence_report.schema.json", &report);
    assert_eq!(report["params"]["p"], serde_json::json!(3.0));
    assert_eq!(first_line(&tmp.path().join("converge.csv")), "delta,point_id,vx,vy,vz,err_p");
    let rows = fs::read_to_string(tmp.path().join("converge.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows, report["records"].as_array().unwrap().len());
}

#[test]
fn interface_reports_match_schema() {
    let tmp = tempfile::tempdir().unwrap();
    for (args, file) in [
        (&["blowup", "--delta-series", "0.2,0.1,0.05"][..], "blowup.json"),
        (&["natural", "--delta-series", "0.2,0.1"][..], "natural.json"),
        (&["star", "--field", "gradient_jump", "--delta-series", "0.2,0.1", "--quad", "4,6"][..], "star.json"),
        (&["star", "--offinterface", "--delta-series", "0.1,0.05"][..], "star_offinterface.json"),
    ] {
        let out = run_in(tmp.path(), args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
        assert_valid("convergence_report.schema.json", &read_json(&tmp.path().join(file)));
    }
}

#[test]
fn failing_check_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["star", "--delta-series", "0.2,0.1", "--quad", "4,6"]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("FAIL star_limit")), "{stdout}");
    assert!(tmp.path().join("star.json").exists());
}

#[test]
fn solve_outputs_and_config_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("solve.json");
    fs::write(
        &cfg,
        r#"{"study": "solve", "field": "constant", "box": {"lo": [0,0,0], "hi": [1,1,1]}, "h": 0.0625, "ratio": 2}"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("o");
    let out = run_in(&out_dir, &["solve", "--config", cfg.to_str().unwrap(), "--field", "linear", "--material", "homogeneous:2,1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report = read_json(&out_dir.join("solve.json"));
    assert_valid("solve.schema.json", &report);
    assert_eq!(report["config"]["field"], "linear");
    assert_eq!(report["config"]["h"], serde_json::json!(0.0625));
    assert_eq!(first_line(&out_dir.join("solve.csv")), "x,y,z,ux,uy,uz,tag");
}

#[test]
fn thread_env_is_a_fallback() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_peridyn"))
        .args(["moments", "--out", tmp.path().to_str().unwrap()])
        .env("PERIDYN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_peridyn"))
        .args(["moments", "--threads", "2", "--out", tmp.path().to_str().unwrap()])
        .env("PERIDYN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn documented_examples_are_valid_configs() {
    for entry in fs::read_dir(docs().join("examples")).unwrap() {
        let path = entry.unwrap().path();
        assert_valid("study_config.schema.json", &read_json(&path));
        let cfg = peridyn_cli::StudyConfig::load(&path);
        assert!(cfg.is_ok(), "{}: {:?}", path.display(), cfg.err());
    }
}
