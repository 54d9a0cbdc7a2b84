use std::path::PathBuf;
use std::process::{Command, Output};

use nonsig::bounds::BoundResult;
use nonsig::io::parse_distribution;
use nonsig::simulate::SimulationOutcome;
use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn nonsig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nonsig")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = nonsig(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn nu_json_on_pr_box() {
    let v = json(&["nu", "--json", &data("pr_box.json")]);
    assert_eq!(v["quantity"], "nu_tilde");
    assert_eq!(v["value"].as_f64(), Some(2.0));
    assert_eq!(v["tool"], "nonsig");
    assert!(v["tool_version"].is_string());
    assert!(v["input_digest"].as_str().unwrap().starts_with("sha256:"));
    // The report is a BoundResult plus envelope fields.
    let r: BoundResult = serde_json::from_value(v).unwrap();
    assert!((r.dual_value - 2.0).abs() < 1e-9);
}

#[test]
fn correlation_schema_gives_same_answer() {
    let a = json(&["gamma2", "--json", &data("pr_box.json")]);
    let b = json(&["gamma2", "--json", &data("pr_corr.json")]);
    assert_eq!(a["value"], b["value"]);
    assert_ne!(a["input_digest"], b["input_digest"]);
}

#[test]
fn validate_reports_signaling() {
    let out = nonsig(&["validate", &data("signaling.json")]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("non-signaling from Bob to Alice"), "{stderr}");
    let v = json(&["validate", "--json", &data("pr_box.json")]);
    assert_eq!(v["valid"], true);
    // Bound commands refuse invalid input with the same code.
    assert_eq!(nonsig(&["nu", &data("signaling.json")]).status.code(), Some(1));
}

#[test]
fn basis_rank() {
    let v = json(&["basis", "--json", "--nx", "2", "--ny", "2"]);
    assert_eq!(v["rank"], 8);
    assert_eq!(v["basis"].as_array().unwrap().len(), 8);
}

#[test]
fn exit_codes() {
    assert_eq!(nonsig(&["nu", "--frobnicate", &data("pr_box.json")]).status.code(), Some(64));
    assert_eq!(nonsig(&["nu-eps", &data("pr_box.json")]).status.code(), Some(64));
    assert_eq!(nonsig(&["smp-classical", &data("pr_box.json")]).status.code(), Some(64));
    assert_eq!(nonsig(&["nu", "--vertex-cap", "3", &data("pr_box.json")]).status.code(), Some(2));
    assert_eq!(nonsig(&["gamma2", "--sdp-dim-cap", "4", &data("pr_box.json")]).status.code(), Some(2));
    assert_eq!(nonsig(&["gamma2", "--max-iterations", "2", &data("pr_box.json")]).status.code(), Some(3));
    assert_eq!(nonsig(&["nu", &data("missing.json")]).status.code(), Some(1));
    assert_eq!(nonsig(&["nu", &data("both_forms.json")]).status.code(), Some(1));
    assert_eq!(nonsig(&["nu-eps", "--epsilon", "1.5", &data("pr_box.json")]).status.code(), Some(1));
    assert_eq!(nonsig(&["--version"]).status.code(), Some(0));
}

#[test]
fn vertex_cap_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_nonsig"))
        .env("NONSIG_VERTEX_CAP", "5")
        .args(["nu", &data("pr_box.json")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulation_is_byte_identical() {
    let args = ["smp-classical", "--json", "--config", &data("sim.json")];
    let a = nonsig(&args);
    let b = nonsig(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["outcome"]["seed"], 7);
    assert_eq!(v["outcome"]["plan"]["trials"], 20000);
    let outcome: SimulationOutcome = serde_json::from_value(v["outcome"].clone()).unwrap();
    assert!(outcome.empirical_distance <= 0.1);

    let other = nonsig(&["smp-classical", "--json", "--config", &data("sim.json"), "--seed", "8"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn quantum_and_boolean_runs() {
    let v = json(&["smp-quantum", "--json", &data("pr_box.json"), "--delta", "0.2", "--replays", "500", "--seed", "1"]);
    assert_eq!(v["outcome"]["plan"]["pool_size"], 3200);
    assert_eq!(v["outcome"]["pool_ok"], true);
    let v = json(&["smp-boolean", "--json", &data("pr_corr.json"), "--delta", "0.05", "--replays", "100"]);
    assert_eq!(v["outcome"]["trials"], 48);
    assert_eq!(v["within_delta"], true);
}

#[test]
fn xor_bias_and_reports() {
    let v = json(&["xor-bias", "--json", &data("chsh_game.json")]);
    assert_eq!(v["classical"]["bias"].as_f64(), Some(0.5));
    assert!((v["quantum"]["bias"].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-4);
    let v = json(&["gap-check", "--json", &data("pr_box.json")]);
    assert_eq!(v["holds"], true);
    let v = json(&["decompose", "--json", &data("pr_box.json")]);
    assert!(v["residual"].as_f64().unwrap() < 1e-7);
    let v = json(&["bell", "--json", "--class", "npa1", &data("pr_box.json")]);
    assert!((v["value_on_input"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-4);
    let v = json(&["nu-corr", "--json", &data("pr_box.json")]);
    assert_eq!(v["primal_certificate"]["kind"], "sign_decomposition");
}

#[test]
fn output_file_and_table() {
    let dir = std::env::temp_dir().join(format!("nonsig-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let out = nonsig(&["nu", "--pretty", "-o", path.to_str().unwrap(), &data("pr_box.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "nu");
    std::fs::remove_dir_all(&dir).unwrap();

    let table = String::from_utf8(nonsig(&["nu", &data("pr_box.json")]).stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("value") && l.ends_with("2.00000000")));
}

#[test]
fn fixtures_parse() {
    for name in ["pr_box.json", "pr_corr.json", "signaling.json"] {
        parse_distribution(&std::fs::read_to_string(data(name)).unwrap()).unwrap();
    }
}
