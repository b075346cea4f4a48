//! End-to-end runs of the command-line tool.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_confrelax");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn record(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON record")
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

#[test]
fn classify_exit_codes() {
    let ok = run(&["classify", "--energy", "svk_isochoric"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(record(&ok)["quasiconvex"], true);

    let not = run(&["classify", "--energy", "exp_hencky{k=0.11}"]);
    assert_eq!(not.status.code(), Some(10));
    assert_eq!(record(&not)["quasiconvex"], false);

    assert_eq!(run(&["classify", "--energy", "exp_hencky{k=-1}"]).status.code(), Some(2));
    assert_eq!(run(&["classify", "--energy", "no_such_energy"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["eval", "--energy", "dev_hencky"]).status.code(), Some(2));
    assert_eq!(run(&["eval", "--energy", "dev_hencky", "--t", "0.5"]).status.code(), Some(2));
    assert_eq!(run(&["gap", "--config", "/nonexistent/config.toml"]).status.code(), Some(2));
    let out = run(&["eval", "--energy", "dev_hencky"]);
    assert!(!out.stderr.is_empty());
}

#[test]
fn gap_and_laminate_values() {
    let cfg = configs().join("exp_hencky.toml");
    let gap = run(&["gap", "--config", cfg.to_str().unwrap()]);
    assert_eq!(gap.status.code(), Some(0));
    let g = record(&gap);
    assert!((g["gap"]["x0"].as_f64().unwrap() - 12.0186).abs() < 1e-2);
    assert!((g["gap"]["delta"].as_f64().unwrap() - 0.0221558).abs() < 1e-5);
    assert!((g["disc_homogeneous"].as_f64().unwrap() - 6.20155).abs() < 1e-3);
    assert!((g["disc_relaxed"].as_f64().unwrap() - 6.13194).abs() < 1e-3);

    let lam = run(&["laminate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(lam.status.code(), Some(0));
    let c = &record(&lam)["certificate"];
    // θ t₁ + (1 − θ) t₂ = t on the affine segment
    let (t1, t2, theta) = (c["t1"].as_f64().unwrap(), c["t2"].as_f64().unwrap(), c["theta"].as_f64().unwrap());
    assert!((theta - (t2 - 12.0186) / (t2 - t1)).abs() < 1e-9);
    assert!((theta - 0.714884).abs() < 1e-5);
    assert!(c["rank_one_residual"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn eval_reports_both_energies() {
    let out = run(&["eval", "--energy", "cosh{L=2}", "--t", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let r = record(&out);
    // 𝕂 = 5/3 ≤ L, inside the binodal region
    assert!((r["kk"].as_f64().unwrap() - 5.0 / 3.0).abs() < 1e-12);
    assert!(r["qw"].as_f64().unwrap().abs() < 1e-12);
    assert!((r["w"].as_f64().unwrap() - ((5.0f64 / 3.0 - 2.0).cosh() - 1.0)).abs() < 1e-12);
}

#[test]
fn oracle_check_pass_and_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("oracle.toml");
    std::fs::write(
        &cfg,
        "energy = \"exp_hencky{k=0.11}\"\n[oracle]\nradius = 3.0\nsc_samples = 60\npc_samples = 12\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let ok = run(&["oracle-check", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert_eq!(record(&ok)["pass"], true);
    assert!(header(&out_dir.join("oracle_sc.csv")).starts_with("x,y"));

    std::fs::write(
        &cfg,
        "energy = \"exp_hencky{k=0.11}\"\n[oracle]\nradius = 3.0\nsc_samples = 60\npc_samples = 12\nsc_bound = 1e-12\n",
    )
    .unwrap();
    let tight = run(&["oracle-check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(tight.status.code(), Some(11));
}

#[test]
fn envelope_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run(&["envelope", "--energy", "exp_hencky{k=0.11}", "--out", d.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(header(&a.join("envelope.csv")), "t,h,cmh");
    for f in ["envelope.json", "envelope.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn simulate_is_deterministic_and_bracketed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("exp_hencky.toml");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--level",
            "2",
            "--seed",
            "7",
            "--out",
            d.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["simulate.json", "report.json", "fields.csv", "fields_nodes.csv", "energies.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(header(&a.join("fields.csv")), "centroid_x,centroid_y,det,kk");
    assert_eq!(header(&a.join("energies.csv")), "iteration,energy");
    assert_eq!(header(&a.join("fields_nodes.csv")), "node,x,y,phi_x,phi_y,boundary");

    let report: Value = serde_json::from_str(&std::fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 7);
    assert_eq!(report["config"]["level"], 2);
    let energies = report["energies"].as_array().unwrap();
    let e: Vec<f64> = energies.iter().map(|p| p[1].as_f64().unwrap()).collect();
    assert!(e.windows(2).all(|w| w[1] <= w[0]));
}
