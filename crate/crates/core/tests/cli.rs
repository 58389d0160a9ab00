use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn gapflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gapflow"))
        .args(args)
        .current_dir(dir)
        .env_remove("GAPFLOW_THREADS")
        .output()
        .expect("binary runs")
}

struct Table {
    meta: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Self {
        let text = std::fs::read_to_string(path).unwrap();
        let mut meta = Vec::new();
        let mut header = Vec::new();
        let mut rows = Vec::new();
        for line in text.lines() {
            if let Some(m) = line.strip_prefix("# ") {
                let (k, v) = m.split_once('=').unwrap();
                meta.push((k.to_string(), v.to_string()));
            } else if header.is_empty() {
                header = line.split(',').map(str::to_string).collect();
            } else {
                rows.push(line.split(',').map(|x| x.parse().unwrap()).collect());
            }
        }
        Self { meta, header, rows }
    }

    fn col(&self, name: &str) -> Vec<f64> {
        let j = self.header.iter().position(|h| h == name).unwrap();
        self.rows.iter().map(|r| r[j]).collect()
    }

    fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

const JACOBI: [&str; 15] = [
    "gap", "--ensemble", "jacobi", "--n", "2", "--a", "0", "--b", "0", "--s-from", "-0.9", "--s-to", "0.9",
    "--points", "19",
];

#[test]
fn gap_writes_one_row_per_point() {
    let dir = TempDir::new().unwrap();
    let mut args = JACOBI.to_vec();
    args.extend(["--method", "fredholm", "-o", "f.csv"]);
    let out = gapflow(dir.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = Table::read(&dir.path().join("f.csv"));
    assert_eq!(t.rows.len(), 19);
    assert_eq!(t.header, ["s", "E2", "sigma", "q", "p", "u", "v", "w"]);
    assert_eq!(t.meta("ensemble"), Some("jacobi"));
    assert_eq!(t.meta("method"), Some("fredholm"));
    let s = t.col("s");
    assert_eq!((s[0], s[18]), (-0.9, 0.9));
}

#[test]
fn routes_agree_through_the_cli() {
    let dir = TempDir::new().unwrap();
    for (m, f) in [("fredholm", "f.csv"), ("tw-ode", "t.csv"), ("painleve", "p.csv")] {
        let mut args = JACOBI.to_vec();
        args.extend(["--method", m, "-o", f]);
        assert!(gapflow(dir.path(), &args).status.success(), "{m}");
    }
    let f = Table::read(&dir.path().join("f.csv")).col("E2");
    for other in ["t.csv", "p.csv"] {
        let e = Table::read(&dir.path().join(other)).col("E2");
        let d = f.iter().zip(&e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-5, "{other}: {d}");
    }
    let p = Table::read(&dir.path().join("p.csv"));
    assert!(p.header.contains(&"omega".to_string()));
    assert!(p.meta("alpha").is_some());
}

#[test]
fn full_precision_values() {
    let dir = TempDir::new().unwrap();
    let out = gapflow(dir.path(), &["gap", "--ensemble", "laguerre", "--n", "1", "--s-from", "0.5", "--s-to", "2", "--points", "4"]);
    assert!(out.status.success());
    let t = Table::read(&dir.path().join("gap.csv"));
    for (s, e) in t.col("s").iter().zip(t.col("E2")) {
        assert!((e - (-s).exp()).abs() < 1e-14);
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    for args in [
        vec!["gap", "--ensemble", "jacobi", "--n", "0"],
        vec!["gap", "--ensemble", "jacobi", "--n", "2", "--b", "-3"],
        vec!["gap", "--ensemble", "cauchy", "--n", "2"],
        vec!["gap", "--n", "2"],
        vec!["gap", "--ensemble", "gaussian", "--n", "2", "--s-from", "1"],
        vec!["gap", "--ensemble", "gaussian", "--n", "2", "--method", "bogus"],
        vec!["frobnicate"],
        vec!["diag", "--ensemble", "gaussian", "--n", "2", "--method", "mc"],
        vec!["gap", "--ensemble", "laguerre", "--n", "2", "--a", "0.5", "--method", "mc"],
    ] {
        let out = gapflow(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gapflow"))
        .args(["gap", "--ensemble", "gaussian", "--n", "1"])
        .current_dir(dir.path())
        .env("GAPFLOW_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_keeps_partial_rows() {
    let dir = TempDir::new().unwrap();
    let args = [
        "gap", "--ensemble", "jacobi", "--n", "4", "--a", "1", "--b", "0.5", "--s-from", "0", "--s-to", "0.99",
        "--points", "12", "--method", "tw-ode", "-o", "x.csv",
    ];
    let out = gapflow(dir.path(), &args);
    assert_eq!(out.status.code(), Some(3));
    let t = Table::read(&dir.path().join("x.csv"));
    assert!(!t.rows.is_empty() && t.rows.len() < 12);
    assert_eq!(t.meta("rows_written").unwrap().parse::<usize>().unwrap(), t.rows.len());
    assert!(t.meta("error").is_some());
}

#[test]
fn diag_columns() {
    let dir = TempDir::new().unwrap();
    let out = gapflow(
        dir.path(),
        &["diag", "--ensemble", "jacobi", "--n", "3", "--a", "1", "--b", "0.5", "--s-from", "-0.8", "--s-to", "0.5", "--points", "8"],
    );
    assert!(out.status.success());
    let t = Table::read(&dir.path().join("diag.csv"));
    assert_eq!(t.header, ["s", "q", "p", "u", "v", "w", "R", "sigma"]);
    assert_eq!(t.rows.len(), 8);
    for (sigma, v) in t.col("sigma").iter().zip(t.col("v")) {
        assert!((sigma + 7.5 * v).abs() < 1e-6);
    }
    for ((s, r), sigma) in t.col("s").iter().zip(t.col("R")).zip(t.col("sigma")) {
        assert!(((1.0 - s * s) * r - sigma).abs() < 1e-12 * (1.0 + sigma.abs()));
    }

    let out = gapflow(dir.path(), &["diag", "--ensemble", "gaussian", "--n", "2", "--s-from", "1", "--s-to", "1.00000001", "--points", "2", "--method", "tw-ode", "-o", "t.csv"]);
    assert!(out.status.success());
    let t = Table::read(&dir.path().join("t.csv"));
    assert_eq!(t.header.len(), 8);
}

#[test]
fn tiny_interval_diag() {
    let dir = TempDir::new().unwrap();
    let out = gapflow(dir.path(), &["diag", "--ensemble", "laguerre", "--n", "2", "--a", "1", "--s-from", "1e-6", "--s-to", "2e-6", "--points", "2"]);
    assert!(out.status.success());
    let t = Table::read(&dir.path().join("diag.csv"));
    for c in ["u", "v", "w"] {
        assert!(t.col(c).iter().all(|x| x.abs() < 1e-9), "{c}");
    }
}

#[test]
fn verify_passes_and_reports() {
    let dir = TempDir::new().unwrap();
    let out = gapflow(dir.path(), &["verify", "--ensemble", "gaussian", "--n", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    let checks = json["checks"].as_array().unwrap();
    assert!(checks.len() >= 10);
    for c in checks {
        let obj = c.as_object().unwrap();
        for k in ["name", "max_residual", "tolerance", "pass"] {
            assert!(obj.contains_key(k), "{k}");
        }
    }
    let names: Vec<&str> = checks.iter().map(|c| c["name"].as_str().unwrap()).collect();
    for want in ["cd_identity", "orthonormality", "trace_equals_n", "dual_v_equality", "dlogE_equals_minus_R", "uvw_derivatives"] {
        assert!(names.contains(&want), "{want}");
    }
    assert_eq!(json["pass"], serde_json::Value::Bool(true));
}

#[test]
fn injected_fault_fails_verification() {
    let dir = TempDir::new().unwrap();
    let out = gapflow(dir.path(), &["verify", "--ensemble", "gaussian", "--n", "2", "--perturb-sigma", "1e-3", "-o", "v.json"]);
    assert_eq!(out.status.code(), Some(1));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("v.json")).unwrap()).unwrap();
    assert_eq!(json["pass"], serde_json::Value::Bool(false));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn spacing_routes() {
    let dir = TempDir::new().unwrap();
    let common = ["spacing", "--ensemble", "gaussian", "--n", "2", "--a1", "0", "--a2-from", "0", "--a2-to", "3", "--bins", "12"];
    let mut f = common.to_vec();
    f.extend(["-o", "f.csv"]);
    assert!(gapflow(dir.path(), &f).status.success());
    let mut m = common.to_vec();
    m.extend(["--method", "mc", "-o", "m1.csv"]);
    assert!(gapflow(dir.path(), &m).status.success());
    *m.last_mut().unwrap() = "m2.csv";
    assert!(gapflow(dir.path(), &m).status.success());

    let fp = Table::read(&dir.path().join("f.csv"));
    assert!(fp.col("p").iter().all(|&p| p >= -1e-8));
    let m1 = std::fs::read_to_string(dir.path().join("m1.csv")).unwrap();
    let m2 = std::fs::read_to_string(dir.path().join("m2.csv")).unwrap();
    let strip = |s: &str| s.lines().filter(|l| !l.starts_with("# runtime")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&m1), strip(&m2));

    let mt = Table::read(&dir.path().join("m1.csv"));
    for ((p, se), o) in mt.col("p").iter().zip(mt.col("std_error")).zip(fp.col("p")) {
        assert!((p - o).abs() <= 3.0 * se.max(1e-12), "{p} ± {se} vs {o}");
    }
}

#[test]
fn monte_carlo_gap_column_schema() {
    let dir = TempDir::new().unwrap();
    let out = gapflow(
        dir.path(),
        &["gap", "--ensemble", "laguerre", "--n", "1", "--method", "mc", "--samples", "20000", "--s-from", "0.5", "--s-to", "2", "--points", "4"],
    );
    assert!(out.status.success());
    let t = Table::read(&dir.path().join("gap.csv"));
    assert_eq!(t.header, ["s", "E2", "std_error"]);
    for ((s, e), se) in t.col("s").iter().zip(t.col("E2")).zip(t.col("std_error")) {
        assert!((e - (-s).exp()).abs() <= 3.0 * se);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "# jacobi sweep\nensemble = jacobi\nn = 2\na = 1\nb = 0.5\ns_from = -0.5\ns-to = 0.5\npoints = 5\nformat = json\n",
    )
    .unwrap();
    let out = gapflow(dir.path(), &["--config", "run.cfg", "gap", "--points", "3", "-o", "c.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
    assert_eq!(json["spec"]["kind"], "jacobi");
    assert_eq!(json["spec"]["b"], 0.5);

    std::fs::write(dir.path().join("bad.cfg"), "n = two\n").unwrap();
    let out = gapflow(dir.path(), &["--config", "bad.cfg", "gap", "--ensemble", "gaussian"]);
    assert_eq!(out.status.code(), Some(2));
    let out = gapflow(dir.path(), &["--config", "missing.cfg", "gap"]);
    assert_eq!(out.status.code(), Some(2));
}
