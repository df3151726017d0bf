use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stimsqueeze"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value_of(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("no `{key}` in\n{text}"));
    line.split('=').nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn sweep_reports_visibility() {
    let dir = tempfile::tempdir().unwrap();
    let measured = run(dir.path(), &["sweep"]);
    assert!(measured.status.success());
    assert!((value_of(&stdout(&measured), "visibility_p11 ") - 0.966).abs() < 5e-4);

    let ideal = write(dir.path(), "ideal.toml", "[interferometer]\nr1 = 0.59\nr2 = 0.59\n");
    let o = run(dir.path(), &["sweep", "--config", &ideal, "--gnuplot"]);
    assert!(o.status.success());
    assert_eq!(value_of(&stdout(&o), "visibility_p11 "), 1.0);
    let table = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("phi,p00,p01,p10,p11"));
    assert_eq!(table.lines().count(), 182);
    assert!(dir.path().join("out/sweep.gp").exists());
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["sweep", "--phi-steps", "1"]).status.code(), Some(2));
    let unknown = write(dir.path(), "unknown.toml", "[interferometer]\nr1 = 0.5\nsqueeze = 2\n");
    let o = run(dir.path(), &["sweep", "--config", &unknown]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("squeeze"));
    let bad = write(dir.path(), "bad.json", r#"{"interferometer": {"eta_h": 1.5}}"#);
    assert_eq!(run(dir.path(), &["fisher", "--config", &bad]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["sweep", "--config", "/nonexistent.toml"]).status.code(), Some(2));
}

#[test]
fn fisher_lines() {
    let dir = tempfile::tempdir().unwrap();
    let ideal = write(dir.path(), "ideal.toml", "[interferometer]\nr1 = 0.59\nr2 = 0.59\n");
    let o = run(dir.path(), &["fisher", "--config", &ideal, "--r-values", "0.11,0.3,0.59"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let best = value_of(&text, "max_fisher_per_photon");
    assert!((best - 11.12).abs() < 0.02);
    assert!(best > value_of(&text, "noon5_per_photon"));
    assert_eq!(value_of(&text, "snl_per_photon"), 2.0);
    let rows = std::fs::read_to_string(dir.path().join("out/fisher_vs_r.csv")).unwrap();
    let per_photon: Vec<f64> = rows.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(per_photon.windows(2).all(|w| w[1] > w[0]));

    // r = asinh(√0.39) gives n̄ = 0.78; η = 0.05 is below its 0.094 threshold
    let lossy = write(
        dir.path(),
        "lossy.toml",
        "[interferometer]\nr1 = 0.5877\nr2 = 0.5877\neta_h = 0.05\neta_v = 0.05\n",
    );
    let o = run(dir.path(), &["fisher", "--config", &lossy]);
    assert!(value_of(&stdout(&o), "max_fisher_per_photon") < 2.0);
}

#[test]
fn thresholds_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["thresholds", "--nbar-min", "0.1", "--nbar-max", "3", "--nbar-steps", "4", "--noon-max", "5"]);
    assert!(o.status.success());
    assert!(value_of(&stdout(&o), "max_numeric_deviation") < 1e-3);
    let tm = std::fs::read_to_string(dir.path().join("out/thresholds_tm.csv")).unwrap();
    assert_eq!(tm.lines().next(), Some("n_bar,eta_tm,eta_tm_numeric"));
    assert_eq!(tm.lines().count(), 5);
    let noon = std::fs::read_to_string(dir.path().join("out/thresholds_noon.csv")).unwrap();
    assert!(noon.lines().nth(5).unwrap().starts_with("5,0.7247796636776955,10"));
}

#[test]
fn validate_and_numerical_failures() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["validate", "--phi-steps", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("PASS"));
    // too small a truncation for the 1e-8 tail budget
    assert_eq!(run(dir.path(), &["validate", "--n-max", "10", "--phi-steps", "5"]).status.code(), Some(4));
}

#[test]
fn track_then_estimate_agree() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(
        dir.path(),
        "track.toml",
        "[scenario]\nrepeats = 4\nrepetition_rate = 1e6\nphase_schedule = [{ phi_set = 0.3, duration = 0.4 }, { phi_set = 0.58, duration = 0.2 }]\n",
    );
    let o = run(dir.path(), &["track", "--config", &scenario, "--exact-calibration"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let tracking = std::fs::read_to_string(out.join("tracking.csv")).unwrap();
    assert_eq!(tracking.lines().count(), 1 + 3 * 4);

    let est_dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_stimsqueeze"))
        .args(["estimate", "--counts"])
        .arg(out.join("tracking.csv"))
        .arg("--calibration")
        .arg(out.join("calibration.json"))
        .arg("--out")
        .arg(est_dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let estimates = std::fs::read_to_string(est_dir.path().join("estimates.csv")).unwrap();
    let column = |text: &str, name: &str| -> Vec<String> {
        let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
        let idx = header.iter().position(|h| *h == name).unwrap();
        text.lines().skip(1).map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
    };
    assert_eq!(column(&tracking, "phi_est"), column(&estimates, "phi_est"));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("tracking_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["format_version"], 1);
    assert_eq!(summary["trials_per_window"], 200_000);
    assert_eq!(summary["window_count"], 3);
}

#[test]
fn track_is_deterministic_and_seeded() {
    let run_track = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = run(dir.path(), &["track", "--exact-calibration", "--repeats", "3", "--repetition-rate", "1e6", "--seed", seed]);
        assert!(o.status.success());
        std::fs::read(dir.path().join("out/tracking.csv")).unwrap()
    };
    let a = run_track("0");
    assert_eq!(a, run_track("0"));
    assert_ne!(a, run_track("1"));
}

#[test]
fn json_format() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["sweep", "--format", "json", "--phi-steps", "5"]);
    assert!(o.status.success());
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/sweep.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 5);
    assert!(rows[0]["p11"].is_number());
    assert!(!dir.path().join("out/sweep.csv").exists());
}

#[test]
fn scaling_preset_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["reproduce", "--preset", "fig1b"]);
    assert!(o.status.success());
    let table = std::fs::read_to_string(dir.path().join("out/fig1b/scaling.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("n_bar,delta_phi_tm,delta_phi_snl,delta_phi_noon"));
    assert_eq!(table.lines().count(), 42);
}
