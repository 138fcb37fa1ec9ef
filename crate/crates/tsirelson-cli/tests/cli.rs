//! End-to-end tests of the command-line interface, exercising the binary
//! the way scripts do: files in, files out, exit codes as the contract.

use std::path::Path;
use std::process::{Command, Output};

use tsirelson::polytope::PolytopeModel;
use tsirelson::scenarios::tilted_maximizer;
use tsirelson::Behavior;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tsirelson"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_code(output: &Output, expected: i32) {
    assert_eq!(
        output.status.code(),
        Some(expected),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn read_model(path: &Path) -> PolytopeModel {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn build_variants_have_expected_sizes() {
    let dir = tempfile::tempdir().unwrap();
    for (args, expected) in [
        (vec!["--variant", "single"], 31usize),
        (
            vec![
                "--variant",
                "single",
                "--bell",
                "chsh",
                "--bound",
                "2.828427124746190",
            ],
            31,
        ),
        (vec!["--variant", "single", "--bound", "2.0"], 23),
        (vec!["--variant", "eight-chsh"], 80),
        (vec!["--variant", "double", "--alpha", "2"], 47),
        (
            vec!["--variant", "single", "--bell", "tilted", "--alpha", "2"],
            31,
        ),
    ] {
        let path = dir.path().join(format!("m{expected}_{}.json", args.len()));
        let mut full = vec!["polytope", "build"];
        full.extend(args.iter().copied());
        full.extend(["-o", path.to_str().unwrap()]);
        let output = run(&full);
        assert_code(&output, 0);
        let stdout = String::from_utf8_lossy(&output.stdout).to_string();
        assert!(
            stdout.contains(&format!("{expected} extreme points")),
            "{stdout}"
        );
        assert_eq!(read_model(&path).len(), expected);
    }
}

#[test]
fn invalid_parameters_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let cases: Vec<Vec<&str>> = vec![
        vec![
            "polytope",
            "build",
            "--variant",
            "double",
            "--alpha",
            "1",
            "-o",
            "x.json",
        ],
        vec!["polytope", "build", "--variant", "double", "-o", "x.json"],
        vec![
            "polytope",
            "build",
            "--variant",
            "single",
            "--bound",
            "4.0",
            "-o",
            "x.json",
        ],
        vec!["polytope", "build", "--variant", "nonsense", "-o", "x.json"],
        vec!["certify", "--variant", "single", "--scenario", "bogus"],
        vec![
            "certify",
            "--variant",
            "single",
            "--scenario",
            "chsh-max",
            "--beta-grid",
            "bad",
        ],
        vec![
            "certify",
            "--variant",
            "single",
            "--scenario",
            "chsh-max",
            "--epsilon",
            "2.0",
        ],
        vec!["sweep-alpha", "--alpha-grid", "2.0:1.0:0.1", "-o", "x.csv"],
    ];
    for case in cases {
        let mut args = case.clone();
        if let Some(slot) = args.iter_mut().find(|a| **a == "x.json" || **a == "x.csv") {
            *slot = out.to_str().unwrap();
        }
        let output = run(&args);
        assert_code(&output, 1);
    }
    assert_code(&run(&["--help"]), 0);
}

#[test]
fn verify_passes_on_build_output_and_roundtrips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("double.json");
    let report_path = dir.path().join("report.json");
    assert_code(
        &run(&[
            "polytope",
            "build",
            "--variant",
            "double",
            "--alpha",
            "2",
            "-o",
            model_path.to_str().unwrap(),
        ]),
        0,
    );
    assert_code(
        &run(&[
            "polytope",
            "verify",
            "-i",
            model_path.to_str().unwrap(),
            "-o",
            report_path.to_str().unwrap(),
        ]),
        0,
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["pass"], serde_json::json!(true));
    assert_eq!(
        report["extremality"]["points"].as_array().unwrap().len(),
        47
    );

    // Round trip: parse, re-serialize, re-parse; values bit-identical.
    let first = read_model(&model_path);
    let second: PolytopeModel =
        serde_json::from_str(&serde_json::to_string(&first).unwrap()).unwrap();
    for (a, b) in first.points().iter().zip(second.points().iter()) {
        assert_eq!(a.label, b.label);
        for (x, y) in a.behavior.values().iter().zip(b.behavior.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn verify_fails_on_duplicated_point() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("single.json");
    assert_code(
        &run(&[
            "polytope",
            "build",
            "--variant",
            "single",
            "-o",
            model_path.to_str().unwrap(),
        ]),
        0,
    );
    let mut value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
    let mut clone = value["points"][0].clone();
    clone["label"] = serde_json::json!("SMUGGLED");
    value["points"].as_array_mut().unwrap().push(clone);
    std::fs::write(&model_path, serde_json::to_string(&value).unwrap()).unwrap();

    let output = run(&["polytope", "verify", "-i", model_path.to_str().unwrap()]);
    assert_code(&output, 1);
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&output.stdout)).unwrap();
    assert_eq!(report["pass"], serde_json::json!(false));
    assert_eq!(report["audit"]["pass"], serde_json::json!(true));
    // The duplicate pair fails extremality; everyone else passes.
    let failing: Vec<&str> = report["extremality"]["points"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|p| p["extreme"] == serde_json::json!(false))
        .map(|p| p["label"].as_str().unwrap())
        .collect();
    assert_eq!(failing, vec!["L0", "SMUGGLED"]);
}

#[test]
fn verify_fails_audit_on_bad_normalization() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("single.json");
    assert_code(
        &run(&[
            "polytope",
            "build",
            "--variant",
            "single",
            "-o",
            model_path.to_str().unwrap(),
        ]),
        0,
    );
    let mut value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
    value["points"][0]["values"][0] = serde_json::json!(0.75);
    std::fs::write(&model_path, serde_json::to_string(&value).unwrap()).unwrap();

    let output = run(&["polytope", "verify", "-i", model_path.to_str().unwrap()]);
    assert_code(&output, 1);
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&output.stdout)).unwrap();
    assert_eq!(report["audit"]["pass"], serde_json::json!(false));
    let first = &report["audit"]["points"][0];
    assert_eq!(first["normalized"], serde_json::json!(false));
}

#[test]
fn certify_from_file_matches_certify_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("double.json");
    assert_code(
        &run(&[
            "polytope",
            "build",
            "--variant",
            "double",
            "--alpha",
            "2",
            "-o",
            model_path.to_str().unwrap(),
        ]),
        0,
    );
    let csv_a = dir.path().join("a.csv");
    let json_a = dir.path().join("a.json");
    let output = run(&[
        "certify",
        "--model",
        model_path.to_str().unwrap(),
        "--scenario",
        "tilted:alpha=2",
        "--beta-grid",
        "0.016:0.02:3",
        "--out-csv",
        csv_a.to_str().unwrap(),
        "--out-json",
        json_a.to_str().unwrap(),
    ]);
    assert_code(&output, 0);

    let json_b = dir.path().join("b.json");
    let output = run(&[
        "certify",
        "--variant",
        "double",
        "--alpha",
        "2",
        "--scenario",
        "tilted:alpha=2",
        "--beta-grid",
        "0.016:0.02:3",
        "--out-json",
        json_b.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert_code(&output, 0);

    let a: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_a).unwrap()).unwrap();
    let b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_b).unwrap()).unwrap();
    assert_eq!(a["best"], b["best"]);
    assert_eq!(a["failed_grid_points"], serde_json::json!(0));
    let bits = a["best"]["bits"].as_f64().unwrap();
    assert!((bits - 6805.23).abs() / 6805.23 < 0.005, "bits = {bits}");

    let csv = std::fs::read_to_string(&csv_a).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# tool: tsirelson"));
    assert!(lines.next().unwrap().starts_with("# command:"));
    assert!(lines.next().unwrap().starts_with("# expected_log"));
    assert_eq!(
        lines.next().unwrap(),
        "beta,expected_log,bits,solver_status"
    );
    assert_eq!(lines.count(), 3);
}

#[test]
fn single_point_alpha_sweep_matches_certify() {
    let dir = tempfile::tempdir().unwrap();
    let alpha_csv = dir.path().join("alpha.csv");
    assert_code(
        &run(&[
            "sweep-alpha",
            "--alpha-grid",
            "2.0:2.0:0.01",
            "--beta-grid",
            "0.016:0.02:3",
            "-o",
            alpha_csv.to_str().unwrap(),
        ]),
        0,
    );
    let json_path = dir.path().join("c.json");
    assert_code(
        &run(&[
            "certify",
            "--variant",
            "double",
            "--alpha",
            "2",
            "--scenario",
            "tilted:alpha=2",
            "--beta-grid",
            "0.016:0.02:3",
            "--out-json",
            json_path.to_str().unwrap(),
        ]),
        0,
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let bits = summary["best"]["bits"].as_f64().unwrap();

    let csv = std::fs::read_to_string(&alpha_csv).unwrap();
    let row = csv.lines().last().unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[0], "2");
    let sweep_bits: f64 = fields[3].parse().unwrap();
    assert!((sweep_bits - bits).abs() <= 1e-6, "{sweep_bits} vs {bits}");
    assert_eq!(fields[4], "ok");
}

#[test]
fn scenario_dump_writes_parseable_behavior() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tilted.json");
    assert_code(
        &run(&[
            "scenario",
            "dump",
            "--name",
            "tilted:alpha=2",
            "-o",
            path.to_str().unwrap(),
        ]),
        0,
    );
    let behavior: Behavior =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let expected = tilted_maximizer(2.0).unwrap();
    for (a, b) in behavior.values().iter().zip(expected.values()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn output_dir_env_var_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .args([
            "scenario",
            "dump",
            "--name",
            "chsh-max",
            "-o",
            "sub/chsh.json",
        ])
        .env("TSIRELSON_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_code(&output, 0);
    assert!(dir.path().join("sub/chsh.json").exists());
}
