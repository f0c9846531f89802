use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stratmoi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stratmoi"))
        .current_dir(dir)
        .env_remove("STRATMOI_SEED")
        .args(args)
        .output()
        .expect("run stratmoi")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &str = r#"{
  "grid": {"nx": 65, "ny": 17},
  "sweep": {"points": 5, "residual_eps": [0.1, 0.05]},
  "probes": {"directions": 2}
}"#;

#[test]
fn small_ny_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), "{\n  \"grid\": {\"ny\": 3}\n}\n").unwrap();
    let out = stratmoi(tmp.path(), &["modes", "--config", "c.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ny ≥ 16 required"), "{err}");
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.json"),
        "{\n  \"probes\": {\"sede\": 1}\n}\n",
    )
    .unwrap();
    let out = stratmoi(tmp.path(), &["coeffs", "--config", "c.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("sede"), "{err}");
}

#[test]
fn invalid_profile_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.json"),
        r#"{"profile": {"kind": "tanh-pycnocline", "rho0": 1.0, "amplitude": 2.0, "center": 0.5, "thickness": 0.1}}"#,
    )
    .unwrap();
    let out = stratmoi(tmp.path(), &["validate-profile", "--config", "c.json"]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn bad_seed_env_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_stratmoi"))
        .current_dir(tmp.path())
        .env("STRATMOI_SEED", "abc")
        .arg("coeffs")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn coeffs_document_embeds_config_and_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let out = stratmoi(tmp.path(), &["coeffs", "--out", "o"]);
    assert!(out.status.success());
    let v = json(&tmp.path().join("o/coeffs.json"));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["kind"], "coeffs");
    assert_eq!(v["config"]["profile"]["kind"], "exponential");
    let k = v["data"]["K"].as_f64().unwrap();
    assert!((k - 644.749).abs() < 0.01, "{k}");
    let meta = json(&tmp.path().join("o/run.json"));
    assert_eq!(meta["subcommand"], "coeffs");
    assert_eq!(meta["files"][0], "coeffs.json");
}

#[test]
fn wave_csv_round_trips_through_functionals() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), SMALL).unwrap();
    let run = |args: &[&str]| {
        let out = stratmoi(tmp.path(), args);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    run(&["wave", "--eps", "0.08", "--config", "c.json", "--out", "w"]);
    run(&[
        "functionals",
        "--eps",
        "0.08",
        "--config",
        "c.json",
        "--out",
        "fresh",
    ]);
    run(&[
        "functionals",
        "--wave",
        "w/wave.csv",
        "--config",
        "c.json",
        "--out",
        "stored",
    ]);
    let fresh = json(&tmp.path().join("fresh/functionals.json"));
    let stored = json(&tmp.path().join("stored/functionals.json"));
    assert_eq!(fresh["data"], stored["data"]);
    let csv = fs::read_to_string(tmp.path().join("w/wave.csv")).unwrap();
    assert!(csv.starts_with("x,y,rho,psi,sigma\n"));
    assert_eq!(csv.lines().count(), 1 + 65 * 17);
    let side = json(&tmp.path().join("w/wave.json"));
    assert_eq!(side["data"]["nx"], 65);
    assert!(side["data"]["L"].as_f64().unwrap() > 0.0);
}

#[test]
fn branch_with_large_eps_records_warning() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.json"),
        r#"{"grid": {"nx": 65, "ny": 17}, "sweep": {"eps_list": [0.05, 0.1, 0.4]}}"#,
    )
    .unwrap();
    let out = stratmoi(tmp.path(), &["branch", "--config", "c.json", "--out", "b"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&tmp.path().join("b/branch.json"));
    let warnings: Vec<String> = v["warnings"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w.as_str().unwrap().to_owned())
        .collect();
    assert!(warnings.iter().any(|w| w.contains("0.4")), "{warnings:?}");
    let csv = fs::read_to_string(tmp.path().join("b/branch.csv")).unwrap();
    assert!(
        csv.starts_with("eps,c,I_def,I_kin,m,m_second_fd,m_second_closed,criticality_residual\n")
    );
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn csv_only_format_skips_json() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.json"),
        r#"{"grid": {"ny": 33}, "output": {"formats": ["csv"]}}"#,
    )
    .unwrap();
    let out = stratmoi(tmp.path(), &["modes", "--config", "c.json", "--out", "m"]);
    assert!(out.status.success());
    assert!(tmp.path().join("m/modes.csv").exists());
    assert!(!tmp.path().join("m/modes.json").exists());
}

#[test]
fn seed_env_changes_residual_directions() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), SMALL).unwrap();
    let run = |seed: &str, dir: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_stratmoi"))
            .current_dir(tmp.path())
            .env("STRATMOI_SEED", seed)
            .args([
                "residuals",
                "--config",
                "c.json",
                "--jobs",
                "1",
                "--out",
                dir,
            ])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        fs::read(tmp.path().join(dir).join("residuals.csv")).unwrap()
    };
    let a = run("7", "a");
    let b = run("7", "b");
    let c = run("8", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn quiet_suppresses_stdout_only() {
    let tmp = tempfile::tempdir().unwrap();
    let out = stratmoi(tmp.path(), &["coeffs", "--quiet", "--out", "q"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(tmp.path().join("q/coeffs.json").exists());
}
