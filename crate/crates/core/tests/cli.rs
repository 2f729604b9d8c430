//! End-to-end runs of the `transmon-parity` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_transmon-parity"));
    cmd.env_remove("TPARITY_WORKERS");
    cmd
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_same_files(a: &Path, b: &Path, names: &[&str]) {
    for name in names {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
}

#[test]
fn spectrum_rerun_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&["spectrum"], &a).status.success());
    assert!(run(&["spectrum"], &b).status.success());
    assert_same_files(&a, &b, &["spectrum.csv", "manifest.json"]);
    let csv = fs::read_to_string(a.join("spectrum.csv")).unwrap();
    assert!(csv.starts_with("m,E_m_plus_GHz,E_m_minus_GHz,eps_m_exact_GHz,eps_m_asymptotic_GHz\n"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn manifest_records_the_run() {
    let tmp = TempDir::new().unwrap();
    let config = configs().join("zz.toml");
    let o = run(&["zz", "--config", config.to_str().unwrap(), "--seed", "17"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let m = json(&tmp.path().join("manifest.json"));
    assert_eq!(m["tool"], "transmon-parity");
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["subcommand"], "zz");
    assert_eq!(m["seed"], 17);
    assert_eq!(m["outputs"], serde_json::json!(["zz.csv"]));
    assert_eq!(m["config"]["sweep"]["points"], 201);
    assert_eq!(m["config"]["circuit"]["alpha_q2_mhz"], -270.0);
}

#[test]
fn manifest_reingest_reproduces_outputs() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let config = write(
        tmp.path(),
        "zz.toml",
        "[circuit]\nomega_q2_ghz = \"4800 MHz\"\nalpha_q2_mhz = -270\n[sweep]\nomega_c_min_ghz = 5.8\nomega_c_max_ghz = 6.4\npoints = 7\n",
    );
    assert!(run(&["zz", "-c", config.to_str().unwrap()], &a).status.success());
    let manifest = a.join("manifest.json");
    let o = run(&["zz", "-c", manifest.to_str().unwrap()], &b);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_same_files(&a, &b, &["zz.csv", "manifest.json"]);
}

#[test]
fn manifest_from_another_subcommand_is_rejected() {
    let tmp = TempDir::new().unwrap();
    assert!(run(&["spectrum"], &tmp.path().join("a")).status.success());
    let manifest = tmp.path().join("a/manifest.json");
    let o = run(&["idle", "-c", manifest.to_str().unwrap()], &tmp.path().join("b"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("spectrum"));
}

#[test]
fn unknown_key_is_a_schema_error_with_its_path() {
    let tmp = TempDir::new().unwrap();
    let config = write(tmp.path(), "idle.toml", "[circuit]\nalpha_q2_mhz = -270\nbogus = 1\n");
    let o = run(&["idle", "-c", config.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("schema error"), "{err}");
    assert!(err.contains("`circuit.bogus`"), "{err}");
}

#[test]
fn angular_frequency_is_a_unit_error() {
    let tmp = TempDir::new().unwrap();
    let config = write(tmp.path(), "idle.toml", "[circuit]\nomega_q2_ghz = \"30.16 rad/ns\"\nalpha_q2_mhz = -270\n");
    let o = run(&["idle", "-c", config.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("unit error"), "{err}");
    assert!(err.contains("circuit.omega_q2_ghz"), "{err}");
}

#[test]
fn invalid_parameter_exits_with_validation_code() {
    let tmp = TempDir::new().unwrap();
    let config = write(tmp.path(), "spectrum.toml", "[transmon]\ne_j_ghz = -1\ne_c_ghz = 0.25\nlevels = 3\n");
    let o = run(&["spectrum", "-c", config.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bad_worker_count_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let o = bin().args(["spectrum", "--out"]).arg(tmp.path()).env("TPARITY_WORKERS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("TPARITY_WORKERS"));
}

#[test]
fn worker_count_does_not_change_results() {
    let tmp = TempDir::new().unwrap();
    let config = configs().join("landscape.toml");
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let dir = tmp.path().join(workers);
        let o = bin()
            .args(["landscape", "-c", config.to_str().unwrap(), "--out"])
            .arg(&dir)
            .env("TPARITY_WORKERS", workers)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(dir);
    }
    assert_same_files(&outputs[0], &outputs[1], &["landscape.csv", "landscape_summary.json", "manifest.json"]);
}

#[test]
fn landscape_csv_has_the_documented_columns() {
    let tmp = TempDir::new().unwrap();
    let config = configs().join("landscape.toml");
    assert!(run(&["landscape", "-c", config.to_str().unwrap()], tmp.path()).status.success());
    let csv = fs::read_to_string(tmp.path().join("landscape.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "ej_ghz,ec_ghz,one_minus_p,term_parity,term_t1_tqg,term_tphi_tqg,term_sqg_t1,term_sqg_tphi,term_leak,term_thermal,dominant,in_optimal_region"
    );
    assert_eq!(csv.lines().count(), 1 + 60 * 60);
    let masked = csv.lines().skip(1).filter(|l| l.ends_with(",true")).count();
    assert_eq!(masked, 360);
}

#[test]
fn json_format_emits_records() {
    let tmp = TempDir::new().unwrap();
    assert!(run(&["spectrum", "--format", "json"], tmp.path()).status.success());
    let rows = json(&tmp.path().join("spectrum.json"));
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0]["m"], 0);
    assert!(rows[2]["eps_m_exact_GHz"].as_f64().unwrap() > 0.0);
}

#[test]
fn channel_flags_override_and_warn_for_leaky_gates() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["channel", "--delta-phi", "0.1", "--delta-p11", "0.01", "--n", "5"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&tmp.path().join("channel.json"));
    assert!(report["n_gate_exact"].is_null());
    assert!(report["fidelity_exact"].as_f64().unwrap() < 1.0);
    let m = json(&tmp.path().join("manifest.json"));
    assert_eq!(m["config"]["channel"]["n_gates"], 5);
    assert_eq!(m["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn channel_haar_estimate_follows_the_seed() {
    let tmp = TempDir::new().unwrap();
    let mut means = Vec::new();
    for seed in ["3", "3", "4"] {
        let dir = tmp.path().join(format!("s{}", means.len()));
        let o = run(&["channel", "--delta-phi", "0.2", "--haar-samples", "2000", "--seed", seed], &dir);
        assert!(o.status.success());
        means.push(json(&dir.join("channel.json"))["haar"]["mean"].as_f64().unwrap());
    }
    assert_eq!(means[0], means[1]);
    assert_ne!(means[0], means[2]);
}

#[test]
fn shipped_configs_validate() {
    let tmp = TempDir::new().unwrap();
    for (kind, file) in [
        ("spectrum", "spectrum"),
        ("zz", "zz"),
        ("idle", "idle"),
        ("parity-zz", "parity-zz"),
        ("effective", "effective"),
        ("gate-simulate", "gate-simulate"),
        ("gate-calibrate", "gate-calibrate"),
        ("channel", "channel"),
        ("landscape", "landscape"),
        ("optimize-step", "optimize-step"),
    ] {
        let config = configs().join(format!("{file}.toml"));
        let dir = tmp.path().join(kind);
        let o = run(&["validate", kind, "-c", config.to_str().unwrap()], &dir);
        assert!(o.status.success(), "{kind}: {}", stderr(&o));
        assert_eq!(json(&dir.join("validate.json"))["valid"], true);
    }
}

#[test]
fn validate_reports_schema_errors() {
    let tmp = TempDir::new().unwrap();
    let config = write(tmp.path(), "gate.toml", "[circuit]\nalpha_q2_mhz = -270\n[pulse]\namplitude_ghz = 1.0\n");
    let o = run(&["validate", "gate-simulate", "-c", config.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tau_c_ns"), "{}", stderr(&o));
}

#[test]
fn idle_points_are_roots() {
    let tmp = TempDir::new().unwrap();
    let config = configs().join("idle.toml");
    assert!(run(&["idle", "-c", config.to_str().unwrap()], tmp.path()).status.success());
    let report = json(&tmp.path().join("idle.json"));
    let residuals = report["residuals_hz"].as_array().unwrap();
    assert_eq!(residuals.len(), 2);
    assert!(residuals.iter().all(|r| r.as_f64().unwrap().abs() < 1.0));
}

#[test]
fn gate_simulate_reports_eight_parity_states() {
    let tmp = TempDir::new().unwrap();
    let config = write(
        tmp.path(),
        "gate.toml",
        "[circuit]\nejec_ratio_q2 = 50\nlevels = 4\n[pulse]\namplitude_ghz = 1.05\ntau_c_ns = 30\n[simulation]\ndt_ns = 0.2\ntrajectory_samples = 11\n",
    );
    let o = run(&["gate", "simulate", "-c", config.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&tmp.path().join("gate.json"));
    assert_eq!(report["per_parity"].as_array().unwrap().len(), 8);
    assert_eq!(report["pairs"].as_array().unwrap().len(), 4);
    let csv = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t_ns,p_00,p_01,p_10,p_11,p_02,p_20\n"));
    assert_eq!(csv.lines().count(), 12);
}

#[test]
fn calibration_outside_its_window_exits_with_calibration_code() {
    let tmp = TempDir::new().unwrap();
    let config = write(
        tmp.path(),
        "cal.toml",
        "[circuit]\nejec_ratio_q2 = 50\nlevels = 4\n[simulation]\ndt_ns = 0.5\n[calibration]\n\
         amplitude_min_ghz = 0.3\namplitude_max_ghz = 0.31\ntau_c_min_ns = 10\ntau_c_max_ns = 11\n\
         sigma_ns = 5\ngrid_amplitude = 2\ngrid_tau_c = 2\ntolerance = 1e-3\nmax_iterations = 2\nmax_infidelity = 1e-3\n",
    );
    let o = run(&["gate", "calibrate", "-c", config.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("calibration"));
}

#[test]
fn optimize_step_uses_measured_coherence() {
    let tmp = TempDir::new().unwrap();
    let config = configs().join("optimize-step.toml");
    let measured = configs().join("measured.json");
    let o = run(&["optimize-step", "-c", config.to_str().unwrap(), "--measured", measured.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let p = json(&tmp.path().join("proposal.json"));
    assert_eq!(p["anchored_model"]["t1_ref_us"].as_f64().unwrap().round(), 80.0);
    assert!(p["proposed"]["one_minus_p"].as_f64().unwrap() <= p["current"]["one_minus_p"].as_f64().unwrap());
    assert!(tmp.path().join("landscape.csv").exists());
}

#[test]
fn optimize_step_without_measurements_fails() {
    let tmp = TempDir::new().unwrap();
    let config = write(tmp.path(), "opt.toml", "[design]\nt1_ref_us = 100\ntphi_ref_us = 100\n");
    let o = run(&["optimize-step", "-c", config.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
