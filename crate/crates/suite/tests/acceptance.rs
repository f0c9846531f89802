//! Acceptance suite at the default configuration: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed; exits 1 if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use stratmoi::config::RunConfig;
use stratmoi::verify::{self, CriterionResult, Suite};

/// Data files of `dir`, excluding the run metadata sidecar.
fn data_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .expect("output directory")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.file_name().is_some_and(|n| n != "run.json"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

/// Criterion 10 through the CLI entry point: two `verify` runs on a reduced config, compared byte for byte.
fn determinism_via_cli(config: &RunConfig) -> CriterionResult {
    let tmp = tempfile::tempdir().expect("tempdir");
    let small = verify::reduced(config);
    let cfg = tmp.path().join("config.json");
    fs::write(&cfg, serde_json::to_string_pretty(&small).unwrap()).unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let args = [
            "stratmoi".as_ref(),
            "verify".as_ref(),
            "--quiet".as_ref(),
            "--config".as_ref(),
            cfg.as_os_str(),
            "--out".as_ref(),
            out.as_os_str(),
        ];
        let code = stratmoi_cli::run_from::<_, &std::ffi::OsStr>(args);
        (code, data_files(&out))
    };
    let (code_a, a) = run("a");
    let (code_b, b) = run("b");
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    let passed = !a.is_empty() && a.len() == b.len() && differing.is_empty() && code_a == code_b;
    CriterionResult {
        id: 10,
        name: "determinism",
        passed,
        detail: format!(
            "{} data files from two `stratmoi verify` runs (nx={}, ny={}, status {code_a}); differing: {differing:?}",
            a.len(),
            small.grid.nx,
            small.grid.ny
        ),
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let config = RunConfig::default();
    let suite = match Suite::run(&config, false) {
        Ok(s) => s,
        Err(e) => {
            println!("FAIL suite setup: {e}");
            return ExitCode::FAILURE;
        }
    };
    let results = vec![
        verify::criterion_1_mode_speed(),
        verify::criterion_2_momentum_law(&suite.branch),
        verify::criterion_3_m_second_law(&suite.branch),
        verify::criterion_4_criticality(&suite.residuals),
        verify::criterion_5_jqt(&config, &suite.builder),
        verify::criterion_6_chain(&suite.chains, config.probes.directions),
        verify::criterion_7_identity(&suite.branch),
        verify::criterion_8_momentum_equivalence(&suite.branch),
        verify::criterion_9_quiescent(&config, &suite.builder),
        determinism_via_cli(&config),
    ];
    println!("acceptance ({} criteria)", results.len());
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        results.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
