//! CLI contract: exit codes 0/1/2 and byte-identical JSON reports under a
//! fixed config and seed.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_algebroid-lab"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn criterion_11_exit_codes_and_determinism() {
    let dir = tempfile::tempdir().unwrap();

    // exit 0: a passing scenario
    let ok_cfg = write(dir.path(), "ok.json", r#"{"preset": "tangent", "seed": 11}"#);
    let out = bin().arg("run").arg(&ok_cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // exit 1: failed checks, report still written
    let bad_structure = write(
        dir.path(),
        "corrupt.json",
        r#"{
            "scenario": "validate",
            "algebroid": {
                "base_dim": 1,
                "rank": 2,
                "anchor": [[[{"index": [0], "re": 1.0}]], [[]]],
                "structure": [
                    [[[], []], [[], [{"index": [0], "re": 0.3}]]],
                    [[[], [{"index": [1], "re": 0.2}]], [[{"index": [1], "re": -0.2}], []]]
                ]
            }
        }"#,
    );
    let report_path = dir.path().join("report.json");
    let out = bin()
        .arg("run")
        .arg(&bad_structure)
        .arg("--out")
        .arg(&report_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report_text = std::fs::read_to_string(&report_path).unwrap();
    let report: serde_json::Value = serde_json::from_str(&report_text).unwrap();
    assert_eq!(report["pass"], serde_json::Value::Bool(false));
    // every check carries a recorded defect value
    for check in report["checks"].as_array().unwrap() {
        assert!(check["defect"].is_number(), "check without a measured defect: {check}");
    }

    // exit 2: schema violation with a diagnostic
    let schema_violation = write(dir.path(), "bad.json", r#"{"scenario": "nonsense"}"#);
    let out = bin().arg("run").arg(&schema_violation).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let not_json = write(dir.path(), "notjson.json", "][");
    let out = bin().arg("run").arg(&not_json).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // determinism: identical config + seed ⇒ byte-identical json
    let det_cfg = write(
        dir.path(),
        "det.json",
        r#"{"scenario": "secondary", "seed": 99, "algebroid": {"preset": "example_3_3", "base_dim": 2}}"#,
    );
    let p1 = dir.path().join("r1.json");
    let p2 = dir.path().join("r2.json");
    for p in [&p1, &p2] {
        let out = bin().arg("run").arg(&det_cfg).arg("--out").arg(p).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let b1 = std::fs::read(&p1).unwrap();
    let b2 = std::fs::read(&p2).unwrap();
    assert_eq!(b1, b2, "reports differ between identical runs");

    // the parallel flag must not change the bytes either
    let p3 = dir.path().join("r3.json");
    let out = bin()
        .arg("run")
        .arg(&det_cfg)
        .arg("--parallel")
        .arg("--out")
        .arg(&p3)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(b1, std::fs::read(&p3).unwrap(), "parallel run changed the report bytes");

    // a CLI seed override changes the seed field but stays deterministic
    let p4 = dir.path().join("r4.json");
    let p5 = dir.path().join("r5.json");
    for p in [&p4, &p5] {
        let out = bin()
            .arg("run")
            .arg(&det_cfg)
            .arg("--seed")
            .arg("123")
            .arg("--out")
            .arg(p)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&p4).unwrap(), std::fs::read(&p5).unwrap());

    println!("ACCEPTANCE 11 cli contract: PASS — exit codes 0/1/2 observed; byte-identical reports under fixed seed (with and without --parallel)");
}

#[test]
fn scenario_override_and_text_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"preset": "example_3_3", "seed": 5}"#);
    // override the preset's example scenario with validate; text output
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--scenario")
        .arg("validate")
        .arg("--format")
        .arg("text")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("jacobi identity"));
    assert!(text.contains("overall: pass"));
}

#[test]
fn example_scenario_reports_residual_honestly() {
    // the example scenario carries the unattainable residual floor and must
    // exit 1 while the rest of its checks pass
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ex.json", r#"{"preset": "example_3_3", "seed": 3}"#);
    let report_path = dir.path().join("ex.json.out");
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(&report_path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| c["pass"] == serde_json::Value::Bool(false))
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(!failed.is_empty());
    assert!(
        failed.iter().all(|n| n.contains("exactness residual floor")),
        "unexpected failures: {failed:?}"
    );
    // the pointwise example checks pass
    assert!(checks
        .iter()
        .any(|c| c["name"].as_str().unwrap().contains("pointwise")
            && c["pass"] == serde_json::Value::Bool(true)));
}

#[test]
fn non_identity_metric_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let sec = write(
        dir.path(),
        "sec.json",
        r#"{"scenario": "secondary", "metric": [[2.0, 0.3], [0.3, 1.0]], "seed": 5,
            "algebroid": {"preset": "example_3_3", "base_dim": 2}}"#,
    );
    let out = bin().arg("run").arg(&sec).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let cr = write(
        dir.path(),
        "cr.json",
        r#"{"scenario": "crainic", "metric": [[2.0, 0.3], [0.3, 1.0]], "seed": 5}"#,
    );
    let out = bin().arg("run").arg(&cr).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // the worked example is pinned to the identity metric
    let ex = write(
        dir.path(),
        "ex.json",
        r#"{"scenario": "example", "metric": [[2.0, 0.0], [0.0, 1.0]]}"#,
    );
    let out = bin().arg("run").arg(&ex).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn truncation_cap_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cap.json", r#"{"preset": "tangent"}"#);
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .env("ALGEBROID_LAB_TRUNC_CAP", "5")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(report["trunc_cap"], serde_json::json!(5));

    let out = bin()
        .arg("run")
        .arg(&cfg)
        .env("ALGEBROID_LAB_TRUNC_CAP", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
