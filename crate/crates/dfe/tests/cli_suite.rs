//! CLI and harness I/O: byte-identical reruns, spec-file loading, the
//! fixture formats (state JSON, circuit text), and histogram emission.

use std::fs;

use dfe::cli::cli_main;
use dfe::harness::{run_fig1, run_sample_dist, run_state, ExperimentSpec};
use dfe::states::{make_haar_random, pure_state_to_json};

fn run(args: &[&str]) -> i32 {
    cli_main(args.iter().map(|s| s.to_string()))
}

#[test]
fn state_run_writes_valid_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("result.json");
    let code = run(&[
        "dfe", "state", "--target", "ghz:4", "--noise", "depolarize:0.1", "--epsilon", "0.1",
        "--delta", "0.1", "--seed", "7", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(value["n"], 4);
    assert_eq!(value["ell"], 1000);
    assert!(value["y_tilde"].as_f64().unwrap() <= 1.05);
    assert_eq!(value["metadata"]["sampler"], "stabilizer");
    assert!(value["settings"].as_array().unwrap().len() == 1000);
}

#[test]
fn identical_specs_produce_identical_bytes() {
    let mut spec = ExperimentSpec::new("state");
    spec.target = Some("w:3".into());
    spec.noise = Some("dephase:0.2".into());
    spec.epsilon = 0.1;
    spec.delta = 0.1;
    spec.seed = 42;
    let a = run_state(&spec).unwrap();
    let b = run_state(&spec).unwrap();
    assert_eq!(a, b);
    spec.seed = 43;
    let c = run_state(&spec).unwrap();
    assert_ne!(a, c);
}

#[test]
fn spec_file_matches_inline_flags() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    fs::write(
        &spec_path,
        r#"{"kind":"sample-dist","target":"ghz:2","seed":5}"#,
    )
    .unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    assert_eq!(
        run(&[
            "dfe", "sample-dist", "--spec", spec_path.to_str().unwrap(), "--out",
            out_a.to_str().unwrap(),
        ]),
        0
    );
    assert_eq!(
        run(&[
            "dfe", "sample-dist", "--target", "ghz:2", "--seed", "5", "--out",
            out_b.to_str().unwrap(),
        ]),
        0
    );
    assert_eq!(
        fs::read_to_string(&out_a).unwrap(),
        fs::read_to_string(&out_b).unwrap()
    );
}

#[test]
fn spec_file_kind_mismatch_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    fs::write(&spec_path, r#"{"kind":"state","target":"ghz:2"}"#).unwrap();
    assert_eq!(
        run(&["dfe", "sample-dist", "--spec", spec_path.to_str().unwrap()]),
        1
    );
    // Inline flags alongside --spec are also a usage error.
    assert_eq!(
        run(&[
            "dfe", "state", "--spec", spec_path.to_str().unwrap(), "--target", "ghz:2",
        ]),
        1
    );
}

#[test]
fn sample_dist_csv_shape() {
    let mut spec = ExperimentSpec::new("sample-dist");
    spec.target = Some("ghz:3".into());
    let csv = run_sample_dist(&spec).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "k,pauli,chi,prob");
    assert_eq!(lines.len(), 9, "8 group elements + header");
    let mut total = 0.0;
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 4);
        assert_eq!(cols[1].len(), 3);
        total += cols[3].parse::<f64>().unwrap();
    }
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn state_file_target_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let psi = make_haar_random(2, 9).unwrap();
    let path = dir.path().join("psi.json");
    fs::write(
        &path,
        serde_json::to_string(&pure_state_to_json(&psi)).unwrap(),
    )
    .unwrap();
    let mut spec = ExperimentSpec::new("state");
    spec.target = Some(format!("file:{}", path.display()));
    spec.epsilon = 0.1;
    spec.delta = 0.1;
    let result = dfe::harness::state_result(&spec).unwrap();
    // Noiseless run against itself: the estimate converges near 1.
    assert!(result.metadata.truth_overlap.unwrap() == 1.0);
    assert!((result.y_tilde - 1.0).abs() < 0.2);
}

#[test]
fn clifford_circuit_file_target() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bell.txt");
    fs::write(&path, "qubits 2\nH 0\nCNOT 0 1\n").unwrap();
    let out = dir.path().join("channel.json");
    let code = run(&[
        "dfe", "channel", "--target",
        &format!("clifford:{}", path.display()),
        "--noise", "depolarize-global:0.2", "--epsilon", "0.1", "--delta", "0.1", "--regime",
        "well-conditioned:1", "--seed", "3", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let value: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(value["n"], 2);
    let truth = value["metadata"]["truth_f_e"].as_f64().unwrap();
    assert!((truth - (0.8 + 0.2 / 16.0)).abs() < 1e-12);
    let f_e = value["f_e"].as_f64().unwrap();
    assert!((f_e - truth).abs() < 0.2);
}

#[test]
fn fig1_emits_histograms_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new("fig1");
    spec.n = Some(3);
    spec.trials = Some(10);
    spec.seed = 5;
    spec.out = Some(dir.path().to_path_buf());
    let artifacts = run_fig1(&spec).unwrap();
    for name in ["residual_hist.csv", "copies_hist.csv", "summary.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let csv = fs::read_to_string(dir.path().join("residual_hist.csv")).unwrap();
    assert!(csv.starts_with("bin_lo,bin_hi,count\n"));
    assert_eq!(csv.lines().count(), 81);
    let total: u64 = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 10);
    let summary: serde_json::Value = serde_json::from_str(&artifacts.summary_json).unwrap();
    assert_eq!(summary["config"]["n"], 3);
    assert_eq!(summary["config"]["ell"], 8000);
    assert!(summary["config"]["noise"]
        .as_str()
        .unwrap()
        .starts_with("depolarize:0.1"));
    // Rerun is byte-identical.
    let again = run_fig1(&spec).unwrap();
    assert_eq!(artifacts.summary_json, again.summary_json);
    assert_eq!(artifacts.residual_csv, again.residual_csv);
}

#[test]
fn fig1_without_out_dir_is_usage_error() {
    assert_eq!(run(&["dfe", "fig1", "--n", "2", "--trials", "2"]), 1);
}

#[test]
fn calibrate_report_passes_on_easy_case() {
    let code = run(&[
        "dfe", "calibrate", "--target", "ghz:2", "--noise", "depolarize-global:0.1",
        "--epsilon", "0.2", "--delta", "0.2", "--trials", "50", "--seed", "1",
    ]);
    assert_eq!(code, 0);
}

#[test]
fn runtime_errors_exit_two() {
    // Enumeration cap: haar:9 needs 4^9 entries, above the default cap.
    assert_eq!(run(&["dfe", "state", "--target", "haar:9"]), 2);
    // Unreadable circuit file.
    assert_eq!(
        run(&["dfe", "channel", "--target", "clifford:/no/such/file.txt"]),
        2
    );
    // Invalid epsilon.
    assert_eq!(
        run(&["dfe", "state", "--target", "ghz:2", "--epsilon", "1.5"]),
        2
    );
}

#[test]
fn fig1_zero_noise_residuals_center_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new("fig1");
    spec.n = Some(4);
    spec.trials = Some(60);
    spec.seed = 77;
    spec.noise = Some("depolarize:0".into());
    spec.out = Some(dir.path().to_path_buf());
    let artifacts = run_fig1(&spec).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&artifacts.summary_json).unwrap();
    let mean = summary["residual_mean"].as_f64().unwrap();
    let std = summary["residual_std"].as_f64().unwrap();
    let se = std / (60f64).sqrt();
    assert!((summary["fidelity_mean"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(mean.abs() < 3.0 * se, "mean {mean} vs 3 SE {}", 3.0 * se);
}

#[test]
fn calibrate_is_deterministic_and_exact_path_never_fails() {
    // sigma = rho for a stabilizer target: X is identically 1, so both
    // stages report zero failures, and reruns are byte-identical.
    let mut spec = ExperimentSpec::new("calibrate");
    spec.target = Some("ghz:3".into());
    spec.epsilon = 0.1;
    spec.delta = 0.1;
    spec.trials = Some(100);
    spec.seed = 9;
    let a = dfe::harness::run_calibration(&spec).unwrap();
    let b = dfe::harness::run_calibration(&spec).unwrap();
    assert_eq!(a, b);
    let report: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(report["sampling_failures"], 0);
    assert_eq!(report["shot_failures"], 0);
    assert_eq!(report["truth_overlap"], 1.0);
    assert_eq!(report["pass"], true);
}

#[test]
fn result_json_parses_back_into_typed_records() {
    let mut spec = ExperimentSpec::new("state");
    spec.target = Some("ghz:3".into());
    spec.epsilon = 0.1;
    spec.delta = 0.1;
    spec.seed = 4;
    let text = run_state(&spec).unwrap();
    let typed: dfe::engine::DfeResult = serde_json::from_str(&text).unwrap();
    assert_eq!(typed.ell, typed.settings.len() as u64);
    for rec in &typed.settings {
        assert!(rec.k < 64);
        assert_eq!(rec.pauli.len(), 3);
    }
    assert_eq!(serde_json::to_string_pretty(&typed).unwrap(), text);
}
