use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use swpe_core::calibrate::ConfigPatch;
use swpe_core::figures::ModeRow;
use swpe_core::link::read_sweep_csv;
use swpe_core::phase_matching::read_residual_csv;
use swpe_core::stats::DecayFit;
use swpe_core::CoincidenceTable;
use tempfile::TempDir;

fn swpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swpe")).args(args).output().expect("spawn swpe")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&swpe(&["frobnicate"])), 2);
    assert_eq!(code(&swpe(&["simulate", "--trials", "0"])), 2);
    assert_eq!(code(&swpe(&["reproduce", "fig9"])), 2);
    assert_eq!(code(&swpe(&["simulate", "--format", "xml"])), 2);
    assert_eq!(code(&swpe(&["calibrate", "--s1", "2.0", "--s19", "2.5"])), 2);
    assert_eq!(code(&swpe(&["bell", "--input", "/nonexistent/table.csv"])), 2);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("plan.json");
    fs::write(&cfg, r#"{"n_trials": 1000, "bogus": 1}"#).unwrap();
    let out = swpe(&["simulate", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn simulate_is_reproducible_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = swpe(&["simulate", "--trials", "50000", "--seed", "7", "--out", path_str(p)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());

    let table = CoincidenceTable::read_csv(bytes.as_slice()).unwrap();
    assert!(table.rows.iter().all(|r| r.counts.heralds() > 0));
    assert_eq!(table.to_csv_string().unwrap().as_bytes(), bytes.as_slice());

    let other = swpe(&["simulate", "--trials", "50000", "--seed", "8"]);
    assert_ne!(other.stdout, bytes);
}

#[test]
fn simulate_json_reports_trials() {
    let out = swpe(&["simulate", "--trials", "1000", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.is_object());
}

#[test]
fn mode_sweep_is_monotone() {
    let out = swpe(&["simulate", "--sweep-m", "1..19", "--trials", "200000"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<ModeRow> = csv::Reader::from_reader(out.stdout.as_slice())
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(rows.iter().map(|r| r.m).collect::<Vec<_>>(), (1..=19).collect::<Vec<_>>());
    assert!(rows.windows(2).all(|w| w[1].p_s_exact > w[0].p_s_exact));
    assert!(rows.iter().all(|r| r.trials == 200_000));
    assert_eq!(code(&swpe(&["simulate", "--sweep-m", "5..2"])), 2);
}

#[test]
fn bell_reads_a_simulated_table() {
    let dir = TempDir::new().unwrap();
    let plan = dir.path().join("plan.json");
    let pairs: Vec<String> = [(0.0, 22.5), (0.0, 67.5), (45.0, 22.5), (45.0, 67.5)]
        .iter()
        .map(|(s, a)| format!(r#"{{"stokes": {{"linear": {s}}}, "anti_stokes": {{"linear": {a}}}}}"#))
        .collect();
    fs::write(&plan, format!(r#"{{"settings": [{}]}}"#, pairs.join(", "))).unwrap();
    let table = dir.path().join("t.csv");
    let sim = swpe(&["simulate", "--config", path_str(&plan), "--trials", "200000", "--out", path_str(&table)]);
    assert_eq!(code(&sim), 0, "{}", String::from_utf8_lossy(&sim.stderr));
    let out = swpe(&["bell", "--input", path_str(&table), "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let s = v["value"].as_f64().unwrap();
    assert!(s > 0.0 && s <= 2.0 * 2f64.sqrt() + 0.5);
}

#[test]
fn decay_default_points() {
    let out = swpe(&["decay", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let fit: DecayFit = serde_json::from_slice(&out.stdout).unwrap();
    let lifetime = fit.lifetime_chsh.unwrap();
    assert!((25.0..=40.0).contains(&lifetime));
}

#[test]
fn pmc_csv_round_trips() {
    let out = swpe(&["pmc"]);
    assert_eq!(code(&out), 0);
    let rows = read_residual_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 19 * 19);
    for r in &rows {
        if r.k == r.l {
            assert!(r.residual <= 1e-14);
        } else {
            assert!(r.residual > 1e-5);
        }
    }
}

#[test]
fn link_csv_round_trips() {
    let dir = TempDir::new().unwrap();
    let sweep = dir.path().join("sweep.json");
    fs::write(&sweep, r#"{"l0_km": [60, 100], "m": [1, 19], "p1": [1e-6]}"#).unwrap();
    let out = swpe(&["link", "--config", path_str(&sweep)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_sweep_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 4);
    let at60 = rows.iter().find(|r| r.l0_km == 60.0 && r.m == 19).unwrap();
    assert_eq!(at60.communication_time_us, 300.0);
    assert!((at60.speedup_exact - 19.0).abs() / 19.0 < 1e-3);
}

#[test]
fn calibrate_patch_values() {
    let out = swpe(&["calibrate"]);
    assert_eq!(code(&out), 0);
    let patch: ConfigPatch = serde_json::from_slice(&out.stdout).unwrap();
    assert!((patch.v1 - 0.937).abs() < 1e-3);
    assert!((patch.beta - 0.85).abs() < 1e-2);
    assert!((patch.tau_c - 235.0).abs() < 1.0);

    let ideal = 2.0 * 2f64.sqrt();
    let s = format!("{ideal}");
    let out = swpe(&["calibrate", "--s1", &s, "--s19", &s, "--s19-late", &s]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"inf\""));
    let patch: ConfigPatch = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(patch.v1, 1.0);
    assert_eq!(patch.beta, 0.0);
    assert!(patch.tau_c.is_infinite());
}

#[test]
fn output_file_is_replaced_atomically() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("nested").join("pmc.csv");
    fs::create_dir_all(out.parent().unwrap()).unwrap();
    fs::write(&out, "stale").unwrap();
    assert_eq!(code(&swpe(&["pmc", "--out", path_str(&out)])), 0);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("k,l,theta_w,theta_r,residual,directional"));
    let leftovers = fs::read_dir(out.parent().unwrap()).unwrap().count();
    assert_eq!(leftovers, 1);
}
