//! End-to-end runs of the `crooks-lab` binary and library entry point.

use std::path::Path;
use std::process::Command;

use clap::Parser;
use crooks_lab::{run, Cli};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crooks-lab"))
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn cli(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("crooks-lab").chain(args.iter().copied())).unwrap()
}

#[test]
fn default_tpm_run_has_twenty_exact_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let report = run(&cli(&["tpm", "--out", out.to_str().unwrap()])).unwrap();
    assert!(report.outcome.failure.is_none());
    let rows = read_csv(&out.join("residuals.csv"));
    assert_eq!(rows.len(), 20);
    for r in &rows {
        assert_eq!(r[0], "exact");
        assert!(r[7].parse::<f64>().unwrap().abs() < 1e-8, "{r:?}");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "tpm");
    assert_eq!(manifest["seed"], 1);
    let listed: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    for name in ["results.json", "residuals.csv", "distributions.csv", "temperatures.csv"] {
        assert!(listed.contains(&name));
        assert!(out.join(name).exists());
    }
    let results: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(results["schema_version"], 1);
    assert_eq!(results["cells"].as_array().unwrap().len(), 5);
}

#[test]
fn manifest_hashes_match_files() {
    use sha2::{Digest, Sha256};
    let dir = tempfile::tempdir().unwrap();
    let report = run(&cli(&["gamma", "--out", dir.path().to_str().unwrap()])).unwrap();
    for f in &report.manifest.files {
        let bytes = std::fs::read(dir.path().join(&f.path)).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&bytes)), f.sha256);
    }
}

#[test]
fn temperature_sweep_at_fixed_tau() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "seed = 4\n[tpm]\ntaus_us = [25.0]\nh_betas = [0.0, 0.15, 0.25, 0.35]\nmode = \"monte_carlo\"\nshots = 16000\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    run(&cli(&["tpm", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])).unwrap();
    let rows = read_csv(&out.join("residuals.csv"));
    assert_eq!(rows.len(), 16);
    let betas: Vec<&str> = rows.iter().step_by(4).map(|r| r[2].as_str()).collect();
    assert_eq!(betas, ["0.0", "0.15", "0.25", "0.35"]);
    assert!(rows.iter().all(|r| r[0] == "monte_carlo" && r[1] == "25.0"));
    let dist = read_csv(&out.join("distributions.csv"));
    let total: u64 = dist.iter().take(4).map(|r| r[8].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 16_000);
}

#[test]
fn zero_shots_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[tpm]\nmode = \"monte_carlo\"\nshots = 0\n").unwrap();
    let out = bin().args(["tpm", "--config", cfg.to_str().unwrap(), "--out"]).arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[gamma]\ntaus = [25.0]\n").unwrap();
    let out = bin().args(["gamma", "--config", cfg.to_str().unwrap(), "--out"]).arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "seed = 5\n[tpm]\nmode = \"exact\"\nshots = 0\n").unwrap();
    // The file alone is valid; switching to Monte Carlo on the command line is not.
    let err = run(&cli(&["tpm", "--config", cfg.to_str().unwrap(), "--mode", "mc"])).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let c = crooks_lab::resolve_config(&cli(&["gamma", "--config", cfg.to_str().unwrap(), "--seed", "9"])).unwrap();
    assert_eq!(c.seed, 9);
}

#[test]
fn gamma_rows_scale_inversely_with_tau() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("g.toml");
    std::fs::write(&cfg, "[gamma]\ntaus_us = [25.0, 50.0, 25.0]\n").unwrap();
    run(&cli(&["gamma", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])).unwrap();
    let rows = read_csv(&dir.path().join("gamma.csv"));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0], rows[2]);
    let g: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!((g[1] - g[0] / 2.0).abs() < 1e-6);
    assert!((3.2..=4.0).contains(&g[0]));
}

#[test]
fn negative_tau_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("g.toml");
    std::fs::write(&cfg, "[gamma]\ntaus_us = [0.0]\n").unwrap();
    let out = bin().args(["gamma", "--config", cfg.to_str().unwrap(), "--out"]).arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn square_pulse_on_single_point_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p.toml");
    std::fs::write(&cfg, "[pulse]\nalpha_points = 1\ndelta_points = 1\nalpha_range = [0.0, 0.0]\ndelta_range_mhz = [0.0, 0.0]\n").unwrap();
    let out = dir.path().join("run");
    run(&cli(&["pulse", "--naive-square", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])).unwrap();
    assert_eq!(read_csv(&out.join("surface.csv")).len(), 1);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("pulse_report.json")).unwrap()).unwrap();
    assert_eq!(report["pulse_kind"], "naive_square");
    let text = std::fs::read_to_string(out.join("pulse.txt")).unwrap();
    let (pulse, model) = crooks_core::pulse::ControlPulse::from_text(&text).unwrap();
    assert_eq!(model.a_zz, -2.16);
    assert_eq!(pulse.len(), 10);
}

#[test]
fn optimizer_miss_exits_three_with_pulse_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p.toml");
    std::fs::write(&cfg, "[pulse]\nrestarts = 1\nmax_iterations = 1\ntarget_objective = 0.9999\nalpha_points = 1\ndelta_points = 1\nalpha_range = [0.0, 0.0]\ndelta_range_mhz = [0.0, 0.0]\n").unwrap();
    let out_dir = dir.path().join("o");
    let out = bin().args(["pulse", "--config", cfg.to_str().unwrap(), "--out"]).arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(out_dir.join("pulse.txt").exists());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("pulse_report.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], false);
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn readout_defaults_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&cli(&["readout", "--seed", "3", "--out", a.to_str().unwrap()])).unwrap();
    run(&cli(&["readout", "--seed", "3", "--threads", "2", "--out", b.to_str().unwrap()])).unwrap();
    for f in ["histogram.csv", "trace.csv", "readout_report.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("readout_report.json")).unwrap()).unwrap();
    assert_eq!(report["reps"], 1500);
    let f = report["fidelity"]["fidelity"].as_f64().unwrap();
    assert!((0.9..=1.0).contains(&f), "{f}");
    let hist = std::fs::read_to_string(a.join("histogram.csv")).unwrap();
    assert!(hist.starts_with("reps,photon_count,frequency\n1500,"));
}

#[test]
fn zero_contrast_readout_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("r.toml");
    std::fs::write(&cfg, "[readout]\nlambda_bright = 0.02\nlambda_dark = 0.02\n").unwrap();
    let out_dir = dir.path().join("o");
    let out = bin().args(["readout", "--config", cfg.to_str().unwrap(), "--out"]).arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("threshold undefined"));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("readout_report.json")).unwrap()).unwrap();
    assert_eq!(report["threshold_status"], "unimodal");
    assert!(report["threshold"].is_null());
}

#[test]
fn table1_rounds_to_published_columns() {
    let dir = tempfile::tempdir().unwrap();
    run(&cli(&["table1", "--out", dir.path().to_str().unwrap()])).unwrap();
    let rows = read_csv(&dir.path().join("table1.csv"));
    let rounded: Vec<[&str; 3]> = rows.iter().map(|r| [r[11].as_str(), r[12].as_str(), r[13].as_str()]).collect();
    assert_eq!(
        rounded,
        [["0.04", "0.02", "0.03"], ["0.16", "0.15", "0.15"], ["0.27", "0.27", "0.27"], ["0.38", "0.34", "0.36"]]
    );
}

#[test]
fn threads_env_var_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("CROOKS_LAB_THREADS", "2")
        .args(["table1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["threads"], 2);
}
