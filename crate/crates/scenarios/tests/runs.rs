use std::process::Command;

use photocount_scenarios::{run, Scenario, ScenarioConfig, ScenarioResult, Table};

fn quick(s: Scenario, overrides: &[&str]) -> ScenarioConfig {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    s.canonical_config().with_overrides(&o).unwrap()
}

fn col<'a>(t: &'a Table, name: &str) -> &'a [f64] {
    t.column(name).unwrap_or_else(|| panic!("{}: no column {name}", t.name))
}

fn bits(r: &ScenarioResult) -> Vec<(String, Vec<u64>)> {
    let mut out = Vec::new();
    for t in &r.tables {
        for c in &t.columns {
            if let Some(v) = t.column(&c.name) {
                out.push((format!("{}.{}", t.name, c.name), v.iter().map(|x| x.to_bits()).collect()));
            }
        }
    }
    out
}

#[test]
fn ramsey_recovers_the_configured_detuning_and_rate() {
    let r = run(&Scenario::RamseyStorage.canonical_config(), Some(1)).unwrap();
    let fit = r.table("fit").unwrap();
    assert!((col(fit, "delta_f_s")[0] - 3.96).abs() < 1e-4);
    assert!((col(fit, "gamma_d_s")[0] - col(fit, "gamma_2_s")[0]).abs() < 1e-4);
    assert!((col(fit, "a")[0] - 1.55).abs() < 1e-3);
}

#[test]
fn results_are_bit_identical_across_worker_counts() {
    let c = quick(Scenario::CoherenceRevivals, &["sweep=[{parameter=\"omega_over_chi\",values=[0.25,0.5]},{parameter=\"time\",start=\"0 us\",stop=\"0.6 us\",count=13}]"]);
    let a = run(&c, Some(1)).unwrap();
    let b = run(&c, Some(2)).unwrap();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn run_directory_round_trips_tables_and_wigner_grids() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(&Scenario::WignerSnapshot.canonical_config(), Some(1)).unwrap();
    assert_eq!(r.wigner.len(), 1);
    r.write(dir.path()).unwrap();
    let back = ScenarioResult::read(dir.path()).unwrap();
    assert_eq!(bits(&back), bits(&r));
    assert_eq!(back.wigner, r.wigner);
    assert_eq!(back.config, r.config);
    assert_eq!(back.notes, r.notes);
}

#[test]
fn wigner_snapshot_reconstruction_matches_the_simulated_state() {
    let r = run(&Scenario::WignerSnapshot.canonical_config(), Some(1)).unwrap();
    let s = r.table("summary").unwrap();
    assert!(col(s, "frobenius_error")[0] < 1e-2);
    assert!((col(s, "c_rho")[0] - col(s, "c_rho_direct")[0]).abs() < 1e-3);
    assert!((col(s, "wigner_norm")[0] - 1.0).abs() < 1e-3);
}

#[test]
fn calibration_slope_is_close_to_the_lossless_value() {
    let r = run(&Scenario::CalibrateDisplacement.canonical_config(), Some(1)).unwrap();
    let f = r.table("fit").unwrap();
    let (slope, lossless) = (col(f, "slope_per_ns")[0], col(f, "lossless_slope_per_ns")[0]);
    assert!(slope < lossless && slope > 0.95 * lossless, "{slope} vs {lossless}");
}

#[test]
fn solver_stats_respect_integrity_bounds() {
    for s in [Scenario::RamseyStorage, Scenario::CalibrateDisplacement, Scenario::RabiCalibration] {
        let r = run(&s.canonical_config(), Some(1)).unwrap();
        let st = r.provenance.solver_stats;
        assert!(st.max_trace_defect <= 1e-8, "{s}: {st:?}");
        assert!(st.max_hermiticity_defect <= 1e-9, "{s}: {st:?}");
        assert!(st.min_snapshot_eigenvalue >= -1e-7, "{s}: {st:?}");
        assert!(r.provenance.simulations > 0);
    }
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_photocount"))
}

#[test]
fn cli_lists_every_scenario() {
    let out = cli().arg("list-scenarios").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for s in Scenario::ALL {
        assert!(text.contains(s.name()), "{s}");
    }
}

#[test]
fn cli_runs_and_writes_under_the_output_root() {
    let root = tempfile::tempdir().unwrap();
    let out = cli().args(["run", "rabi-calibration", "--workers", "1"]).env("PHOTOCOUNT_OUT", root.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = root.path().join("rabi-calibration");
    let r = ScenarioResult::read(&dir).unwrap();
    assert!(r.table("fit").is_some());
}

#[test]
fn cli_exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "scenario = \"ramsey-storage\"\n[solver]\nstorage_dim = 3\n").unwrap();
    let good = dir.path().join("good.toml");
    std::fs::write(&good, Scenario::RamseyStorage.canonical_config().to_toml().unwrap()).unwrap();

    let code = |c: &mut Command| c.output().unwrap().status.code();
    assert_eq!(code(cli().args(["validate", "--config"]).arg(&good)), Some(0));
    assert_eq!(code(cli().args(["validate", "--config"]).arg(&bad)), Some(2));
    assert_eq!(code(cli().args(["validate", "--config"]).arg(dir.path().join("missing.toml"))), Some(4));
    assert_eq!(code(cli().args(["run", "ramsey-storage", "--config"]).arg(&good).args(["--override", "solver.rtol=-1"])), Some(2));
    assert_eq!(code(cli().args(["run", "qnd-check", "--config"]).arg(&good)), Some(2));
    // Unreachable tolerances drive the adaptive step to underflow.
    let solver_fail = cli()
        .args(["run", "ramsey-storage", "--config"])
        .arg(&good)
        .args(["--override", "solver.rtol=1e-300", "--override", "solver.atol=1e-300", "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(solver_fail.status.code(), Some(3), "{}", String::from_utf8_lossy(&solver_fail.stderr));
    let out_file = dir.path().join("file");
    std::fs::write(&out_file, "").unwrap();
    assert_eq!(code(cli().args(["run", "ramsey-storage", "--config"]).arg(&good).arg("--out").arg(&out_file)), Some(4));
}
