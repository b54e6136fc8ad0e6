use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::Parser;
use nalgebra::{DMatrix, DVector};

use ratiodual::io::serialize_instance;
use ratiodual::{CertificateKind, ProgramData, ResultFile};
use ratiodual_cli::{run, Cli, EXIT_ERROR, EXIT_OK, EXIT_UNCERTIFIED};

fn instance_a(delta: f64) -> ProgramData {
    ProgramData {
        q: DMatrix::from_element(1, 1, 2.0),
        f: DVector::from_element(1, 0.0),
        b_op: DMatrix::from_element(1, 1, 1.0),
        lambda: 1.0,
        h: DMatrix::from_element(1, 1, -2.0),
        b: DVector::from_element(1, -2.0),
        delta,
    }
}

fn write_instance(dir: &Path, name: &str, data: &ProgramData) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serialize_instance(data).unwrap()).unwrap();
    path
}

/// Runs the command line in-process; returns exit code, stdout and stderr.
fn invoke(args: &[&str]) -> (i32, String, String) {
    let cli = Cli::try_parse_from(std::iter::once("ratiodual").chain(args.iter().copied()))
        .expect("arguments parse");
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(cli, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

#[test]
fn solve_writes_a_certified_result() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "a.json", &instance_a(0.5));
    let result = dir.path().join("a.result.json");
    let (code, _, err) = invoke(&[
        "solve",
        inst.to_str().unwrap(),
        "--output",
        result.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let file: ResultFile =
        serde_json::from_str(&std::fs::read_to_string(&result).unwrap()).unwrap();
    assert_eq!(file.certificate_kind, CertificateKind::Perfect);
    assert!((file.p0_value - 0.7541442500731802).abs() < 1e-9);
    assert!(file.mu_profile.len() >= 64);
    assert_eq!(file.solver_options.grid_points, 64);
}

#[test]
fn single_point_grid_on_a_singleton_set() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "s.json", &instance_a(1.0));
    let (code, out, err) = invoke(&["solve", inst.to_str().unwrap(), "--grid", "1"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let file: ResultFile = serde_json::from_str(&out).unwrap();
    assert!((file.x_star[0] - 1.0).abs() < 1e-12);
    assert!((file.p0_value - 1.125).abs() < 1e-12);
}

#[test]
fn malformed_instance_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "bad.json", &instance_a(0.5));
    let text = std::fs::read_to_string(&inst)
        .unwrap()
        .replacen("\"lambda\"", "\"lambda_\"", 1);
    std::fs::write(&inst, text).unwrap();
    let (code, _, err) = invoke(&["solve", inst.to_str().unwrap()]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("lambda"), "{err}");
}

#[test]
fn missing_file_is_an_error() {
    let (code, _, err) = invoke(&["solve", "/nonexistent/instance.json"]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("reading"), "{err}");
}

#[test]
fn verify_agrees_on_instance_a() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "a.json", &instance_a(0.5));
    let (code, out, err) = invoke(&["verify", inst.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(report["discrepancy"].as_f64().unwrap() <= 1e-4);
    assert!(report["argmin_distance"].as_f64().unwrap() < 1e-3);
}

#[test]
fn verify_rejects_large_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.json");
    let (code, _, _) = invoke(&[
        "gen",
        "--n",
        "4",
        "--m",
        "3",
        "--seed",
        "7",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let (code, _, err) = invoke(&["verify", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains('4'), "{err}");
}

#[test]
fn gen_is_deterministic() {
    let a = invoke(&["gen", "--n", "3", "--m", "2", "--seed", "11"]);
    let b = invoke(&["gen", "--n", "3", "--m", "2", "--seed", "11"]);
    let c = invoke(&["gen", "--n", "3", "--m", "2", "--seed", "12"]);
    assert_eq!(a.0, EXIT_OK);
    assert_eq!(a.1, b.1);
    assert_ne!(a.1, c.1);
}

#[test]
fn sweep_profile_and_landscape() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "a.json", &instance_a(0.5));
    let (code, out, _) = invoke(&["sweep", inst.to_str().unwrap(), "--grid", "9"]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "mu,dual_value,p0_value,certificate_kind,status");
    assert_eq!(lines.len(), 10);

    let (code, out, _) = invoke(&[
        "sweep",
        inst.to_str().unwrap(),
        "--at-mu",
        "1.5",
        "--landscape",
        "20x20",
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 401);
    assert_eq!(out.lines().next().unwrap(), "varsigma,sigma,dual_value");

    let (code, _, _) = invoke(&["sweep", inst.to_str().unwrap(), "--at-mu", "5"]);
    assert_eq!(code, EXIT_ERROR);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "a.json", &instance_a(0.5));
    let bin = env!("CARGO_BIN_EXE_ratiodual");
    let status = Process::new(bin)
        .args(["solve", inst.to_str().unwrap(), "-o"])
        .arg(dir.path().join("r.json"))
        .env("THREADS", "2")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    let status = Process::new(bin)
        .args(["solve"])
        .stderr(std::process::Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_ERROR));
}

#[test]
fn uncertified_solve_still_writes_a_result() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("g.json");
    let (code, _, _) = invoke(&[
        "gen",
        "--n",
        "2",
        "--m",
        "2",
        "--seed",
        "0",
        "-o",
        inst.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let (code, out, _) = invoke(&["solve", inst.to_str().unwrap()]);
    assert_eq!(code, EXIT_UNCERTIFIED);
    let file: ResultFile = serde_json::from_str(&out).unwrap();
    assert_eq!(file.certificate_kind, CertificateKind::WeakOnly);
    assert!(file.p0_value.is_finite());
}
