use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_spatial-iv");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("spawn spatial-iv")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = run(dir, args);
    assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

/// Header and rows of an output CSV, skipping `#` metadata.
fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(p).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn simulate(dir: &Path, scenario: &str, replicates: usize) {
    write(
        dir,
        "sim.json",
        &format!(r#"{{"schema_version": 1, "scenario": {scenario}, "replicates": {replicates}}}"#),
    );
    ok(dir, &["simulate", "--config", "sim.json", "--out", "sim"]);
}

fn data_json(path: &str) -> String {
    format!(r#"{{"path": "{path}", "schema": {{"id": "id", "outcome": "outcome"}}}}"#)
}

#[test]
fn simulate_writes_replicates_and_manifest() {
    let t = TempDir::new().unwrap();
    simulate(t.path(), r#"{"mechanism": "M1", "outcome_model": "linear"}"#, 2);
    for r in 0..2 {
        let (h, rows) = read_csv(&t.path().join(format!("sim/replicate_{r:04}.csv")));
        assert_eq!(rows.len(), 503);
        for c in ["id", "x", "y", "a", "outcome"] {
            col(&h, c);
        }
        let (h, rows) = read_csv(&t.path().join(format!("sim/replicate_{r:04}_truth.csv")));
        assert_eq!(rows.len(), 503);
        assert_eq!(h, ["id", "a_uc", "a_c", "u"]);
    }
    let (_, rows) = read_csv(&t.path().join("sim/manifest.csv"));
    assert_eq!(rows.len(), 2);

    let first = fs::read(t.path().join("sim/replicate_0001.csv")).unwrap();
    ok(t.path(), &["simulate", "--config", "sim.json", "--out", "again"]);
    assert_eq!(first, fs::read(t.path().join("again/replicate_0001.csv")).unwrap());

    ok(t.path(), &["simulate", "--config", "sim.json", "--out", "other", "--seed", "5"]);
    assert_ne!(first, fs::read(t.path().join("other/replicate_0001.csv")).unwrap());
}

#[test]
fn config_errors_exit_2() {
    let t = TempDir::new().unwrap();
    write(t.path(), "bad.json", r#"{"schema_version": 1, "replicats": 3}"#);
    let o = run(t.path(), &["simulate", "--config", "bad.json"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("replicats"));

    write(t.path(), "nover.json", r#"{"replicates": 3}"#);
    assert_eq!(code(&run(t.path(), &["simulate", "--config", "nover.json"])), 2);
    write(t.path(), "future.json", r#"{"schema_version": 99}"#);
    assert_eq!(code(&run(t.path(), &["simulate", "--config", "future.json"])), 2);

    assert_eq!(code(&run(t.path(), &["estimate"])), 2, "no dataset configured");
    assert_eq!(code(&run(t.path(), &["simulate", "--threads", "0"])), 2);
}

#[test]
fn data_errors_exit_3() {
    let t = TempDir::new().unwrap();
    assert_eq!(code(&run(t.path(), &["estimate", "--data", "missing.csv"])), 3);
    write(t.path(), "short.csv", "id,x,y,a\n1,0,0,1\n2,1,1,zzz\n");
    assert_eq!(code(&run(t.path(), &["decompose", "--data", "short.csv"])), 3);
}

#[test]
fn resolved_config_reproduces_outputs() {
    let t = TempDir::new().unwrap();
    simulate(t.path(), r#"{"n": 200}"#, 1);
    write(
        t.path(),
        "est.json",
        &format!(
            r#"{{"schema_version": 1, "data": {}, "cutoffs": [0.5], "methods": ["baseline", "iv"]}}"#,
            data_json("sim/replicate_0000.csv")
        ),
    );
    ok(t.path(), &["estimate", "--config", "est.json", "--out", "a", "--seed", "11"]);
    ok(t.path(), &["estimate", "--config", "a/resolved_config.json", "--out", "b"]);
    let a = fs::read_to_string(t.path().join("a/estimate.csv")).unwrap();
    let b = fs::read_to_string(t.path().join("b/estimate.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        fs::read_to_string(t.path().join("a/resolved_config.json")).unwrap(),
        fs::read_to_string(t.path().join("b/resolved_config.json")).unwrap()
    );
}

#[test]
fn estimate_rows_per_cutoff_and_method() {
    let t = TempDir::new().unwrap();
    simulate(t.path(), r#"{"n": 250}"#, 1);
    write(
        t.path(),
        "est.json",
        &format!(
            r#"{{"schema_version": 1, "data": {}, "cutoffs": [-0.5, 0, 0.25, 0.5, 0.75, 1, 1.5]}}"#,
            data_json("sim/replicate_0000.csv")
        ),
    );
    ok(t.path(), &["estimate", "--config", "est.json", "--out", "dr"]);
    let (h, rows) = read_csv(&t.path().join("dr/estimate.csv"));
    assert_eq!(rows.len(), 7 * 4);
    let m = col(&h, "method");
    let mut methods: Vec<&str> = rows.iter().map(|r| r[m].as_str()).collect();
    methods.dedup();
    for name in ["baseline", "spatialcoord", "IV-TPS", "IV-TPS+spatialcoord"] {
        assert_eq!(rows.iter().filter(|r| r[m] == name).count(), 7, "{name}");
    }
    let (psi, lo, hi) = (col(&h, "psi"), col(&h, "ci_lo"), col(&h, "ci_hi"));
    for r in &rows {
        let v = |k: usize| r[k].parse::<f64>().unwrap();
        assert!(v(lo) <= v(psi) && v(psi) <= v(hi));
    }

    for s in ["2sls", "2sri", "doublepred"] {
        ok(t.path(), &["estimate", "--config", "est.json", "--out", s, "--model", "linear", "--strategy", s]);
        let (h, rows) = read_csv(&t.path().join(format!("{s}/estimate.csv")));
        assert_eq!(rows.len(), 1);
        let beta: f64 = rows[0][col(&h, "beta")].parse().unwrap();
        assert!(beta.is_finite());
    }
}

#[test]
fn json_output_format() {
    let t = TempDir::new().unwrap();
    simulate(t.path(), r#"{"n": 120}"#, 1);
    ok(
        t.path(),
        &["decompose", "--data", "sim/replicate_0000.csv", "--out", "j", "--format", "json"],
    );
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("j/decomposition.json")).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 120);
    assert_eq!(v["metadata"]["command"], "decompose");
}

#[test]
fn decompose_hits_variance_target() {
    let t = TempDir::new().unwrap();
    simulate(t.path(), r#"{"theta_c": 0.1}"#, 1);
    write(
        t.path(),
        "dec.json",
        &format!(
            r#"{{"schema_version": 1, "data": {}, "basis": {{"variance_target": 0.2}}}}"#,
            data_json("sim/replicate_0000.csv")
        ),
    );
    ok(t.path(), &["decompose", "--config", "dec.json", "--out", "d"]);
    let (h, rows) = read_csv(&t.path().join("d/decomposition.csv"));
    let get = |name: &str| -> Vec<f64> { rows.iter().map(|r| r[col(&h, name)].parse().unwrap()).collect() };
    let (a, ac, auc) = (get("a"), get("a_c"), get("a_uc"));
    for i in 0..a.len() {
        assert!((a[i] - ac[i] - auc[i]).abs() < 1e-9);
    }
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>()
    };
    let share = var(&ac) / var(&a);
    assert!((0.18..=0.22).contains(&share), "share {share}");
}

#[test]
fn erc_default_grid_and_risk_ratio() {
    let t = TempDir::new().unwrap();
    simulate(t.path(), r#"{"n": 200}"#, 1);
    write(
        t.path(),
        "erc.json",
        &format!(
            r#"{{"schema_version": 1, "data": {}, "risk_ratio": [1.0, 0.0]}}"#,
            data_json("sim/replicate_0000.csv")
        ),
    );
    ok(t.path(), &["erc", "--config", "erc.json", "--out", "e"]);
    let (_, rows) = read_csv(&t.path().join("e/erc.csv"));
    assert_eq!(rows.len(), 100);
    let (h, rr) = read_csv(&t.path().join("e/risk_ratio.csv"));
    assert_eq!(rr.len(), 1);
    let ratio: f64 = rr[0][col(&h, "ratio")].parse().unwrap();
    assert!(ratio.is_finite());
    assert!(fs::read_to_string(t.path().join("e/erc.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn sensitivity_dimensions() {
    let t = TempDir::new().unwrap();
    write(t.path(), "five.json", r#"{"schema_version": 1, "scenario": {"n": 200}}"#);
    ok(t.path(), &["sensitivity", "--config", "five.json", "--out", "s5"]);
    let (h, rows) = read_csv(&t.path().join("s5/sensitivity.csv"));
    let dims: Vec<&str> = rows.iter().map(|r| r[col(&h, "dim")].as_str()).collect();
    assert_eq!(dims, ["4", "5", "6", "7", "8"]);

    write(t.path(), "one.json", r#"{"schema_version": 1, "scenario": {"n": 200}, "dims": [6]}"#);
    ok(t.path(), &["sensitivity", "--config", "one.json", "--out", "s1"]);
    assert_eq!(read_csv(&t.path().join("s1/sensitivity.csv")).1.len(), 1);

    for dims in ["[1]", "[2]", "[1, 2, 3]"] {
        write(
            t.path(),
            "lap.json",
            &format!(r#"{{"schema_version": 1, "scenario": {{"n": 200}}, "kind": "laplacian_eigen", "dims": {dims}}}"#),
        );
        let o = run(t.path(), &["sensitivity", "--config", "lap.json", "--out", "sl"]);
        assert_eq!(code(&o), 2, "{dims}");
    }
    write(
        t.path(),
        "lap.json",
        r#"{"schema_version": 1, "scenario": {"n": 200}, "kind": "laplacian_eigen", "dims": [3, 4]}"#,
    );
    ok(t.path(), &["sensitivity", "--config", "lap.json", "--out", "sl"]);
}

#[test]
fn benchmark_summary_is_consistent() {
    let t = TempDir::new().unwrap();
    write(t.path(), "b.json", r#"{"schema_version": 1, "scenario": {"n": 150}}"#);
    let o = run(t.path(), &["benchmark", "--config", "b.json", "--replicates", "3", "--out", "b"]);
    assert!([0, 4].contains(&code(&o)), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = read_csv(&t.path().join("b/benchmark_summary.csv"));
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let bias: f64 = r[col(&h, "bias_x100")].parse().unwrap();
        let rmse: f64 = r[col(&h, "rmse_x100")].parse().unwrap();
        assert!(rmse + 1e-12 >= bias.abs());
        assert_eq!(r[col(&h, "succeeded")], "3");
    }
    let (_, reps) = read_csv(&t.path().join("b/benchmark_replicates.csv"));
    assert_eq!(reps.len(), 3 * 6);
}
