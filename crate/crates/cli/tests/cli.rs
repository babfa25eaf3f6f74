use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use freespace::constants::mhz_to_rad;
use freespace::spectra::{transmission_at, LineshapeParams};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_freespace"))
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn binary")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Header and rows of a CSV artifact, provenance line skipped.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = read_csv(path);
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn overlap_value(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in {stdout}"))
        .parse()
        .unwrap()
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("fit_report.json")).unwrap()).unwrap()
}

fn param(report: &serde_json::Value, name: &str) -> (f64, f64) {
    let p = report["parameters"].as_array().unwrap().iter().find(|p| p["name"] == name).unwrap();
    (p["value"].as_f64().unwrap(), p["std_error"].as_f64().unwrap())
}

#[test]
fn overlap_of_reference_optics() {
    let out = run_ok(&["overlap", "--config", &config("experiment.toml")]);
    let l = overlap_value(&out, "overlap");
    assert!((l - 0.1116).abs() < 1e-4, "{l}");
    let p_sat = overlap_value(&out, "ideal_saturation_power_pw");
    assert!((p_sat - 1.21).abs() < 0.0121, "{p_sat}");
}

#[test]
fn weaker_focusing_lowers_overlap() {
    let reference = overlap_value(&run_ok(&["overlap", "--config", &config("experiment.toml")]), "overlap");
    let legacy = overlap_value(&run_ok(&["overlap", "--config", &config("legacy_na055.toml")]), "overlap");
    assert!((legacy / reference - 2.0 / 3.0).abs() < 0.01, "{legacy} vs {reference}");
}

#[test]
fn half_overlap_extinguishes_fully() {
    let out = run_ok(&["overlap", "--lambda", "0.5"]);
    assert_eq!(overlap_value(&out, "extinction"), 1.0);
    assert!(out.contains("overlap_source = input"));
}

#[test]
fn overlap_rejects_unphysical_lambda() {
    let out = run(&["overlap", "--lambda", "1.5"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn simulate_is_byte_identical_across_workers() {
    let tmp = TempDir::new().unwrap();
    let cfg = config("stationary_fit_scale.toml");
    let mut contents = Vec::new();
    for threads in ["1", "4"] {
        let out = tmp.path().join(threads);
        run_ok(&["--threads", threads, "simulate", "--config", &cfg, "--seed", "3", "--out", path_str(&out)]);
        let mut files: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        contents.push(files.iter().map(|f| (f.file_name().unwrap().to_owned(), std::fs::read(f).unwrap())).collect::<Vec<_>>());
    }
    assert_eq!(contents[0].len(), 3);
    assert_eq!(contents[0], contents[1]);
}

#[test]
fn cold_atom_reproduces_stationary_dip() {
    let tmp = TempDir::new().unwrap();
    run_ok(&["simulate", "--config", &config("stationary_fit_scale.toml"), "--out", path_str(tmp.path())]);
    let table = tmp.path().join("transmission.csv");
    let truth = column(&table, "true_transmission");
    let se = column(&table, "true_std_error");
    let dip = LineshapeParams::matched(mhz_to_rad(6.9), mhz_to_rad(48.03), 0.0467, 0.13);
    for (d, tau) in column(&table, "detuning_mhz").iter().zip(&truth) {
        let expected = transmission_at(&dip, mhz_to_rad(*d));
        assert!((tau - expected).abs() < 1e-12, "{d} MHz: {tau} vs {expected}");
    }
    assert!(se.iter().all(|&s| s == 0.0));
}

#[test]
fn fit_round_trip_recovers_truth() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    let fit = tmp.path().join("fit");
    run_ok(&["simulate", "--config", &config("stationary_fit_scale.toml"), "--seed", "21", "--out", path_str(&sim)]);
    run_ok(&["fit", "--data", path_str(&sim.join("transmission.csv")), "--out", path_str(&fit)]);
    let r = report(&fit);
    assert_eq!(r["converged"], true);
    for (name, truth) in [("linewidth", 6.9), ("shift", 48.03), ("overlap", 0.0467), ("phase", 0.13)] {
        let (v, e) = param(&r, name);
        assert!((v - truth).abs() < 3.0 * e, "{name}: {v} ± {e} vs {truth}");
    }
    assert_eq!(r["n_points"], 41);
}

#[test]
fn count_table_fits_like_transmission_table() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    run_ok(&["simulate", "--config", &config("stationary_fit_scale.toml"), "--out", path_str(&sim)]);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_ok(&["fit", "--data", path_str(&sim.join("transmission.csv")), "--out", path_str(&a)]);
    run_ok(&["fit", "--data", path_str(&sim.join("counts.csv")), "--out", path_str(&b)]);
    for name in ["linewidth", "shift", "overlap", "phase"] {
        let (va, _) = param(&report(&a), name);
        let (vb, _) = param(&report(&b), name);
        assert!((va - vb).abs() <= 1e-9 * va.abs().max(1.0), "{name}: {va} vs {vb}");
    }
}

#[test]
fn reflection_fit_recovers_backscatter_probability() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    let fit = tmp.path().join("fit");
    run_ok(&["simulate", "--config", &config("stationary_fit_scale.toml"), "--out", path_str(&sim)]);
    run_ok(&["fit", "--data", path_str(&sim.join("reflection.csv")), "--model", "reflection", "--out", path_str(&fit)]);
    let (p, e) = param(&report(&fit), "resonant_probability");
    assert!((p - 0.0061).abs() < 3.0 * e, "{p} ± {e}");
}

#[test]
fn empty_data_file_is_a_parse_error() {
    let tmp = TempDir::new().unwrap();
    let data = write_config(&tmp, "empty.csv", "");
    let out = run(&["fit", "--data", path_str(&data), "--out", path_str(tmp.path())]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn malformed_row_names_its_line() {
    let tmp = TempDir::new().unwrap();
    let data = write_config(&tmp, "bad.csv", "x,y,sigma\n40,0.9,0.01\n41,abc,0.01\n42,0.95,0.01\n");
    let out = run(&["fit", "--data", path_str(&data), "--out", path_str(tmp.path())]);
    assert_eq!(out.status.code(), Some(5));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn nonpositive_sigma_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let data = write_config(&tmp, "zero.csv", "x,y,sigma\n40,0.9,0.01\n41,0.9,0\n");
    let out = run(&["fit", "--data", path_str(&data), "--out", path_str(tmp.path())]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn unknown_config_key_exits_with_config_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "bad.toml", "[optics]\nfocal_lenght_mm = 5.0\n");
    let out = run(&["simulate", "--config", path_str(&cfg), "--out", path_str(tmp.path())]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn conflicting_shift_inputs_exit_with_config_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "bad.toml", "[shifts]\ncenter_shift_mhz = 47.0\nac_stark_peak_mhz = 50.0\n");
    let out = run(&["overlap", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_argument_is_a_usage_error() {
    assert_eq!(run(&["simulate"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn assert_replays(artifact: &Path, original: &Path, tmp: &TempDir, tag: &str) {
    let again = tmp.path().join(format!("replay-{tag}"));
    run_ok(&["replay", path_str(artifact), "--out", path_str(&again)]);
    assert_eq!(dir_contents(original), dir_contents(&again), "{tag}");
}

#[test]
fn replay_reproduces_every_artifact() {
    let tmp = TempDir::new().unwrap();

    let sim = tmp.path().join("sim");
    run_ok(&["simulate", "--config", &config("experiment.toml"), "--samples", "2000", "--format", "json", "--out", path_str(&sim)]);
    assert_replays(&sim.join("counts.json"), &sim, &tmp, "simulate");

    let sweep = tmp.path().join("sweep");
    run_ok(&["heating-sweep", "--config", &config("experiment.toml"), "--samples", "2000", "--out", path_str(&sweep)]);
    assert_replays(&sweep.join("sweep.csv"), &sweep, &tmp, "sweep");

    let fit = tmp.path().join("fit");
    run_ok(&["fit", "--data", path_str(&sim.join("transmission.json")), "--out", path_str(&fit)]);
    assert_replays(&fit.join("fit_report.json"), &fit, &tmp, "fit");

    let ov = tmp.path().join("overlap");
    run_ok(&["overlap", "--lambda", "0.2", "--out", path_str(&ov)]);
    assert_replays(&ov.join("overlap.csv"), &ov, &tmp, "overlap");
}

#[test]
fn unheated_sweep_is_flat() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "flat.toml", "samples = 5000\n[sweep]\nphotons = [0, 0, 0]\n");
    run_ok(&["heating-sweep", "--config", path_str(&cfg), "--out", path_str(tmp.path())]);
    let (_, rows) = read_csv(&tmp.path().join("sweep.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| *r == rows[0]));
}

#[test]
fn reduction_factor_scales_overlap() {
    let tmp = TempDir::new().unwrap();
    let base = "[shifts]\ncenter_shift_mhz = 48.0\n[lineshape]\noverlap = 0.0467\n[thermal]\ntemperature_uk = [0.0, 0.0, 0.0]\n";
    let mut minima = Vec::new();
    for alpha in ["0.0", "0.54"] {
        let body = base.replace("overlap = 0.0467\n", &format!("overlap = 0.0467\nalpha = {alpha}\n"));
        let cfg = write_config(&tmp, &format!("{alpha}.toml"), &body);
        let out = tmp.path().join(alpha);
        run_ok(&["simulate", "--config", path_str(&cfg), "--out", path_str(&out)]);
        let tau = column(&out.join("transmission.csv"), "true_transmission");
        minima.push(tau.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let eps = |l: f64| 4.0 * l * (1.0 - l);
    assert!((1.0 - minima[0] - eps(0.0467)).abs() < 1e-12);
    assert!((1.0 - minima[1] - eps(0.46 * 0.0467)).abs() < 1e-12);
}
