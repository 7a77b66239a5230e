use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use opfun::config::Config;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_opfun"))
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run_config(cmd: &str, config: &str, out: &Path) -> Output {
    let dir = out.parent().unwrap();
    let path = dir.join(format!(
        "{cmd}-{}.json",
        out.file_name().unwrap().to_string_lossy()
    ));
    fs::write(&path, config).unwrap();
    bin()
        .args([cmd, "--config"])
        .arg(&path)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(
        r.records()
            .map(|x| x.unwrap().iter().map(String::from).collect()),
    );
    rows
}

#[test]
fn published_schema_is_current() {
    let path = repo().join("docs/config.schema.json");
    let mut text = serde_json::to_string_pretty(&Config::schema()).unwrap();
    text.push('\n');
    if std::env::var_os("OPFUN_WRITE_SCHEMA").is_some() {
        fs::write(&path, &text).unwrap();
    }
    let published = fs::read_to_string(&path)
        .expect("docs/config.schema.json exists; regenerate with OPFUN_WRITE_SCHEMA=1");
    assert_eq!(
        published, text,
        "schema drifted; regenerate with OPFUN_WRITE_SCHEMA=1"
    );
}

#[test]
fn example_configs_parse() {
    for e in fs::read_dir(repo().join("configs")).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "json") {
            Config::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        }
    }
}

#[test]
fn unknown_keys_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    for cfg in [
        r#"{"command": "identities", "sed": 3}"#,
        r#"{"command": "identities", "tolerances": {"identiy": 1e-9}}"#,
        r#"{"command": "derivative", "functions": [{"kind": "gaussian", "c": 1.0, "width": 2}]}"#,
        r#"{"command": "derivative", "functions": [{"kind": "rational", "poles": [{"re": 0, "im": 1, "multiplicity": 2}]}]}"#,
        r#"{"command": "ssf", "operators": {"source": "random", "scale": 1}}"#,
    ] {
        let o = run_config("identities", cfg, &tmp.path().join("x"));
        assert_eq!(code(&o), 2, "{cfg}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn usage_errors() {
    let tmp = TempDir::new().unwrap();
    // command mismatch
    let o = run_config("ssf", r#"{"command": "identities"}"#, &tmp.path().join("a"));
    assert_eq!(code(&o), 2);
    // missing file
    let o = bin()
        .args(["ssf", "--config", "/nonexistent/opfun.json"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    // bad flag
    let o = bin().args(["ssf", "--frobnicate"]).output().unwrap();
    assert_eq!(code(&o), 2);
    // truncation radius outside the box
    let cfg = r#"{"schrodinger": {"dimension": 1, "grid_points": [16], "box_half_width": 2.0,
                  "potential": {"type": "truncated-coulomb", "radius": 3.0, "strength": 1.0}}}"#;
    assert_eq!(
        code(&run_config("demo-schrodinger", cfg, &tmp.path().join("b"))),
        2
    );
    // non-Hermitian inline operator
    let cfg =
        r#"{"operators": {"source": "inline", "h": [[1, 2], [0, 1]], "v": [[0, 0], [0, 1]]}}"#;
    assert_eq!(code(&run_config("ssf", cfg, &tmp.path().join("c"))), 2);
    // oversized grid for a multiple-operator-integral suite, rejected before it is built
    let cfg = r#"{"operators": {"source": "schrodinger", "dimension": 1, "grid_points": 5000, "box_half_width": 10.0,
                  "potential": {"type": "gaussian-well", "depth": 1.0, "width": 1.0}}}"#;
    let o = run_config("derivative", cfg, &tmp.path().join("d"));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("4096"));
    let o = bin()
        .args(["classes", "--out"])
        .arg(tmp.path().join("e"))
        .env("OPFUN_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn identities_suite_reports() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("id");
    let o = run_config(
        "identities",
        r#"{"command": "identities", "seed": 7, "dims": [1, 2, 4], "cases": 1}"#,
        &out,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&out.join("identities.csv"));
    assert_eq!(
        rows[0].join(","),
        "name,dim,n,j,jset,t,f,seed,lhs_norm,rhs_norm,residual_norm,relative_residual,tolerance,pass,extra"
    );
    assert!(rows.len() > 100);
    assert!(rows[1..].iter().all(|r| r[13] == "true"));
    let bounds = read_csv(&out.join("bounds.csv"));
    assert_eq!(
        bounds[0].join(","),
        "name,dim,seed,f,param,lhs,rhs,margin,holds"
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failures"], 0);
    assert_eq!(summary["command"], "identities");
}

#[test]
fn tightened_tolerance_fails_with_exit_one() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"dims": [3], "cases": 1, "tolerances": {"identity": 1e-300}}"#;
    let o = run_config("identities", cfg, &tmp.path().join("t"));
    assert_eq!(code(&o), 1);
}

#[test]
fn ssf_writes_eta_and_trace_formula() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("ssf");
    let o = run_config("ssf", r#"{"dims": [5], "ssf": {"k_max": 3}}"#, &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let eta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("ssf_eta.json")).unwrap()).unwrap();
    let etas = eta.as_array().unwrap();
    assert_eq!(etas.len(), 3);
    for (k, e) in etas.iter().enumerate() {
        assert_eq!(e["order"], k + 1);
        let bp = e["breakpoints"].as_array().unwrap().len();
        assert_eq!(e["coefficients"].as_array().unwrap().len() + 1, bp);
    }
    let tf = read_csv(&out.join("trace_formula.csv"));
    assert_eq!(tf.len() - 1, 3 * 4);
    for name in [
        "ssf_eta_samples.csv",
        "ssf_checks.csv",
        "weighted_norms.csv",
    ] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn operators_from_matrix_market_and_inline() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("mm");
    let cfg = repo().join("configs/ssf-matrix-market.json");
    let o = bin()
        .args(["ssf", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let samples = read_csv(&out.join("ssf_eta_samples.csv"));
    assert_eq!(samples.len() - 1, 2 * 121);

    let cfg = r#"{"operators": {"source": "inline", "h": [[1, 0], [0, -1]], "v": [[[0.1, 0], [0, 0.2]], [[0, -0.2], [0.3, 0]]]},
                  "orders": [1, 2], "functions": [{"kind": "rational", "poles": [{"re": 0, "im": 2, "mult": 1}]}]}"#;
    let o = run_config("derivative", cfg, &tmp.path().join("inline"));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        read_csv(&tmp.path().join("inline/derivatives.csv")).len(),
        3
    );
}

#[test]
fn schrodinger_demo_is_report_only() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("demo");
    let o = bin()
        .args(["demo-schrodinger", "--config"])
        .arg(repo().join("configs/demo-schrodinger.json"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = read_csv(&out.join("schrodinger_schatten.csv"));
    assert!(table[1..]
        .iter()
        .all(|r| r[5].parse::<f64>().unwrap().is_finite()));
    let diag: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(out.join("schrodinger_diagnostics.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(diag.as_array().unwrap().len(), 4);

    let cfg = r#"{"schrodinger": {"dimension": 1, "grid_points": [32], "box_half_width": 5.0,
                  "potential": {"type": "gaussian-well", "depth": 0.0, "width": 1.0}}}"#;
    let out = tmp.path().join("zero");
    assert_eq!(code(&run_config("demo-schrodinger", cfg, &out)), 0);
    let table = read_csv(&out.join("schrodinger_schatten.csv"));
    assert!(table.len() > 1);
    assert!(table[1..]
        .iter()
        .all(|r| r[5].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn strict_classes_turns_warnings_into_failures() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"functions": [{"kind": "real-polynomial", "coeffs": [0, 1, 1]}], "classes": {"classes": ["taylor"]}}"#;
    assert_eq!(
        code(&run_config("classes", cfg, &tmp.path().join("loose"))),
        0
    );
    let path = tmp.path().join("strict.json");
    fs::write(&path, cfg).unwrap();
    let o = bin()
        .args(["classes", "--strict-classes", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(tmp.path().join("strict"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    for (cmd, cfg) in [
        ("identities", r#"{"dims": [2, 3], "cases": 1}"#),
        ("ssf", r#"{"dims": [4], "ssf": {"k_max": 2}}"#),
        (
            "taylor",
            r#"{"taylor": {"n_max": 12}, "functions": [{"kind": "rational", "poles": [{"re": 0, "im": 2}]}]}"#,
        ),
    ] {
        let a = tmp.path().join(format!("{cmd}-a"));
        let b = tmp.path().join(format!("{cmd}-b"));
        assert_eq!(code(&run_config(cmd, cfg, &a)), 0);
        let o = bin()
            .args([cmd, "--config"])
            .arg(tmp.path().join(format!("{cmd}-{cmd}-a.json")))
            .arg("--out")
            .arg(&b)
            .env("OPFUN_THREADS", "1")
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        assert_eq!(snapshot(&a), snapshot(&b), "{cmd}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"seed": 1, "dims": [3], "ssf": {"k_max": 1}}"#;
    let a = tmp.path().join("a");
    assert_eq!(code(&run_config("ssf", cfg, &a)), 0);
    let path = tmp.path().join("ssf-a.json");
    let b = tmp.path().join("b");
    assert_eq!(
        code(
            &bin()
                .args(["ssf", "--seed", "2", "--config"])
                .arg(&path)
                .arg("--out")
                .arg(&b)
                .output()
                .unwrap()
        ),
        0
    );
    assert_ne!(
        fs::read(a.join("ssf_eta.json")).unwrap(),
        fs::read(b.join("ssf_eta.json")).unwrap()
    );
}
