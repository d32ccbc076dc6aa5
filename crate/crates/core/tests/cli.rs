use std::process::Command;

use qillum::cli::{run, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use qillum::sweep::{SweepSpec, PRESETS, PRESET_POINTS};
use serde_json::Value;

fn call(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut full = vec!["qillum"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn binary(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qillum")).args(args).output().unwrap()
}

#[test]
fn qfi_reports_closed_form_and_oracle() {
    let (code, out, _) = call(&["qfi", "--family", "tmsv", "--ns", "1", "--nb", "10", "--oracle"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!((v["qfi_analytic"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!((v["qfi_oracle"].as_f64().unwrap() - 0.25).abs() < 2.5e-7);
}

#[test]
fn domain_errors_exit_one_with_json() {
    let (code, _, err) = call(&["qfi", "--family", "tmsv", "--ns", "1", "--nb", "-3"]);
    assert_eq!(code, EXIT_FAILURE);
    let v: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"], "domain");
}

#[test]
fn undersized_cutoff_exits_one() {
    let (code, _, err) = call(&["qfi", "--family", "tmsv", "--z", "0.999", "--cutoff", "20", "--nb", "1", "--oracle"]);
    assert_eq!(code, EXIT_FAILURE);
    let v: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"], "truncation_too_small");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(call(&[]).0, EXIT_USAGE);
    assert_eq!(call(&["qfi", "--nb", "1"]).0, EXIT_USAGE);
    assert_eq!(call(&["sweep"]).0, EXIT_USAGE);
    assert_eq!(call(&["sweep", "--preset", "fig9z"]).0, EXIT_USAGE);
    assert_eq!(call(&["simulate", "--family", "coherent", "--ns", "1", "--nb", "1", "--m", "10"]).0, EXIT_USAGE);
    assert_eq!(call(&["--help"]).0, EXIT_OK);
}

#[test]
fn preset_headers() {
    let expect = |cols: &[&str]| {
        let mut h = vec!["axis".to_string()];
        for c in cols {
            for k in 0..4 {
                h.push(format!("{c}_k{k}"));
            }
        }
        h
    };
    let table = [
        ("fig2", vec!["mean_photon", "snr_over_eta", "qfi"]),
        ("fig3", vec!["averaged_qfi", "advantage", "g2"]),
        ("fig2a", vec!["mean_photon"]),
        ("fig2b", vec!["mean_photon"]),
        ("fig2c", vec!["snr_over_eta", "qfi"]),
        ("fig2d", vec!["snr_over_eta", "qfi"]),
        ("fig3a", vec!["averaged_qfi"]),
        ("fig3b", vec!["averaged_qfi"]),
        ("fig3c", vec!["advantage"]),
        ("fig3d", vec!["advantage"]),
        ("fig3e", vec!["g2"]),
        ("fig3f", vec!["g2"]),
    ];
    assert_eq!(table.len(), PRESETS.len());
    for (name, cols) in table {
        assert_eq!(SweepSpec::preset(name).unwrap().header(), expect(&cols), "{name}");
    }
}

#[test]
fn preset_csv_shape() {
    for name in ["fig2", "fig3"] {
        let (code, out, err) = call(&["sweep", "--preset", name]);
        assert_eq!(code, EXIT_OK, "{err}");
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), PRESET_POINTS + 1);
        let width = lines[0].split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == width));
    }
    let (_, out, _) = call(&["sweep", "--preset", "fig3"]);
    let header: Vec<&str> = out.lines().next().unwrap().split(',').collect();
    let first: Vec<f64> = out.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    for k in 1..=3 {
        let col = header.iter().position(|h| *h == format!("averaged_qfi_k{k}")).unwrap();
        assert!((first[col] - 4.0 / 11.0).abs() < 5e-3, "{}", first[col]);
    }
    let (_, out, _) = call(&["sweep", "--preset", "fig2"]);
    let first: Vec<f64> = out.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(&first[..5], &[0.0, 0.0, 1.0, 2.0, 3.0]);
}

#[test]
fn sweep_to_file_and_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let (code, out, _) = call(&[
        "sweep", "--family", "mps", "--kappa", "0,1", "--axis", "r", "--min", "0.1", "--max", "1", "--points", "4",
        "--outputs", "qfi,g2", "--nb", "1", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    let written = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(written.lines().next().unwrap(), "axis,qfi_k0,qfi_k1,g2_k0,g2_k1");
    assert_eq!(written.lines().count(), 5);

    let spec_path = dir.path().join("spec.json");
    let spec = SweepSpec::preset("fig3d").unwrap();
    let spec = SweepSpec { axis_points: 3, ..spec };
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let (code, out, _) = call(&["sweep", "--spec", spec_path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, spec.to_csv().unwrap());
}

#[test]
fn verify_empty_and_custom_grids() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "").unwrap();
    let (code, out, _) = call(&["verify", "--grid", empty.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["configurations"], 0);
    assert_eq!(v["passed"], true);

    let grid = dir.path().join("grid.json");
    std::fs::write(
        &grid,
        r#"[{"family":"mpa","kappa":1,"z":0.4,"N_B":1.0},{"family":"tmsv","z":0.999,"N_B":1.0,"cutoff":20}]"#,
    )
    .unwrap();
    let (code, out, _) = call(&["verify", "--grid", grid.to_str().unwrap()]);
    assert_eq!(code, EXIT_FAILURE);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["passed"], false);
    assert_eq!(v["offenders"][0]["index"], 1);
    assert_eq!(v["offenders"][0]["kind"], "truncation_too_small");
}

#[test]
fn simulate_reports_campaign() {
    let (code, out, _) = call(&[
        "simulate", "--family", "coherent", "--ns", "1", "--nb", "1", "--eta", "0.01", "--m", "20000", "--trials",
        "20000", "--seed", "4",
    ]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v["deviation_in_stderr"].as_f64().unwrap().abs() < 4.0);
}

#[test]
fn binary_output_is_byte_identical() {
    let runs: [&[&str]; 4] = [
        &["qfi", "--family", "mpa", "--kappa", "2", "--z", "0.5", "--nb", "1", "--oracle"],
        &["sweep", "--preset", "fig3b"],
        &["simulate", "--family", "tmsv", "--ns", "0.5", "--nb", "5", "--m", "100000", "--trials", "30000", "--seed", "77"],
        &["verify", "--reports"],
    ];
    for args in runs {
        let a = binary(args);
        let b = binary(args);
        assert!(a.status.success(), "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert!(!a.stdout.is_empty());
    }
}

#[test]
fn binary_exit_codes() {
    assert_eq!(binary(&["bogus"]).status.code(), Some(EXIT_USAGE));
    assert_eq!(binary(&["qfi", "--family", "psi-plus", "--p", "2", "--nb", "1"]).status.code(), Some(EXIT_FAILURE));
}
