mod support;

use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};
use support::{read_json, Schemas};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coarse-roe"))
}

fn run_with(dir: &Path, command: &str, config: &Value) -> (i32, Value) {
    let config_path = dir.join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    let out = dir.join(command);
    let status = bin()
        .args([command, "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    let code = status.status.code().unwrap();
    let report = if out.join("report.json").exists() {
        read_json(&out.join("report.json"))
    } else {
        Value::Null
    };
    (code, report)
}

fn assert_valid(schemas: &Schemas, file: &str, value: &Value) {
    let errors = schemas.validate(file, value);
    assert!(errors.is_empty(), "{file} rejected:\n{}", errors.join("\n"));
}

#[test]
fn every_command_writes_a_schema_valid_report() {
    let schemas = Schemas::load();
    let dir = tempfile::tempdir().unwrap();
    let config = json!({
        "seed": 11,
        "space": {"kind": "cycle", "size": 24},
        "unitary": {"displacement": 2.0, "rotation_radius": 1.0, "rotation_angle": 0.1, "phases": true},
        "blocks": 3,
        "radii": [1.0, 2.0]
    });
    assert_valid(&schemas, "config.schema.json", &config);
    for command in ["verify-cartan", "reconstruct", "decompose", "recover", "profile"] {
        let (code, report) = run_with(dir.path(), command, &config);
        assert_eq!(code, 0, "{command} exit code");
        assert_eq!(report["command"], command);
        assert_eq!(report["status"], "ok");
        assert_eq!(report["seed"], 11);
        assert_valid(&schemas, "report.schema.json", &report);
    }
    let csv = std::fs::read_to_string(dir.path().join("recover").join("profile.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("s,band_error,ql_lower,ql_upper"));
    let parts = std::fs::read_to_string(dir.path().join("decompose").join("parts.csv")).unwrap();
    assert_eq!(parts.lines().next(), Some("part,x,y"));
}

#[test]
fn infeasible_recovery_exits_with_negative_status() {
    let schemas = Schemas::load();
    let dir = tempfile::tempdir().unwrap();
    // cos²(0.2) < 0.995, so no threshold in the grid admits a saturating matching
    let config = json!({
        "seed": 5,
        "space": {"kind": "interval", "size": 12},
        "unitary": {"rotation_radius": 1.0, "rotation_angle": 0.2, "rotations": 12},
        "rigidity": {"grid": [0.995]}
    });
    let (code, report) = run_with(dir.path(), "recover", &config);
    assert_eq!(code, 2);
    assert_eq!(report["status"], "negative");
    assert!(report["result"]["reason"].is_string());
    assert_valid(&schemas, "report.schema.json", &report);
}

#[test]
fn malformed_configuration_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run_with(dir.path(), "recover", &json!({"seed": 1, "space": {"kind": "torus"}}));
    assert_eq!(code, 1);
    assert!(report.is_null());
    let (code, _) = run_with(dir.path(), "profile", &json!({"seed": 1, "space": {"kind": "interval", "size": 4}, "colour": 3}));
    assert_eq!(code, 1);
}

#[test]
fn seed_flag_overrides_the_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let output = bin().args(["recover", "--seed", "99", "--out"]).arg(&out).output().unwrap();
    assert!(output.status.success());
    assert_eq!(read_json(&out.join("report.json"))["seed"], 99);
}

#[test]
fn schemas_reject_broken_reports() {
    let schemas = Schemas::load();
    let bogus = json!({"command": "recover", "status": "ok", "rng": "chacha8", "seed": 1});
    assert!(!schemas.validate("report.schema.json", &bogus).is_empty());
    let bad_config = json!({"seed": -1, "space": {"kind": "interval", "size": 3}});
    assert!(!schemas.validate("config.schema.json", &bad_config).is_empty());
}
