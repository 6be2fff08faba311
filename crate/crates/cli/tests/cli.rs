use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mcd_core::calibrate_gain;

fn mcdsim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcdsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("MCDSIM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = "[sweep]\nfields_mt = [0.0, 600.0]\nrepeats = 2\n[spectrum]\nduration_s = 0.262144\n";

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

/// Value after `prefix` on the first stdout line that starts with it.
fn field(out: &str, prefix: &str) -> f64 {
    let line = out.lines().find(|l| l.starts_with(prefix)).unwrap_or_else(|| panic!("{out}"));
    line[prefix.len()..].split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn noise_floor_examples() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcdsim(&["noise-floor", "--gain", "1", "--eta", "0.9"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("0.00 dB"), "{}", stdout(&o));

    let o = mcdsim(&["noise-floor", "--gain", "2.29", "--eta", "0.76"], dir.path());
    assert!(stdout(&o).contains("-3.45 dB"), "{}", stdout(&o));
    // 1 - 2 eta (G - 1) / (2G - 1)
    let linear = 1.0 - 2.0 * 0.76 * 1.29 / 3.58;
    assert!((field(&stdout(&o), "linear variance (rel. shot noise): ") - linear).abs() < 1e-8);

    let o = mcdsim(&["noise-floor", "--gain", "0.5", "--eta", "0.9"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gain must be ≥ 1"), "{}", stderr(&o));

    let o = mcdsim(&["noise-floor", "--gain", "2", "--eta", "1.5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--eta"));
}

#[test]
fn noise_floor_grid_and_budget() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcdsim(&["noise-floor", "--sweep", "grid.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let grid = fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let mut lines = grid.lines();
    assert_eq!(lines.next(), Some("gain,eta,noise_floor_dB"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 17 * 11);
    for r in &rows {
        let (g, eta) = (r[0], r[1]);
        let oracle = 10.0 * (1.0 - 2.0 * eta * (g - 1.0) / (2.0 * g - 1.0)).log10();
        assert!((r[2] - oracle).abs() < 1e-7, "{r:?}");
    }

    // the default budget: -5 dB calibrated at the detector efficiency, then
    // the sample in the probe arm and the balancing filter in the conjugate arm
    let cfg = write_config(dir.path(), "budget.toml", "");
    let o = mcdsim(&["noise-floor", "--budget", &cfg], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!((field(&out, "probe transmission: ") - 0.76).abs() < 1e-9);
    assert!((field(&out, "conjugate transmission: ") - 0.76).abs() < 1e-9);
    let g = field(&out, "gain: ");
    assert!((g - calibrate_gain(-5.0, 0.95).unwrap()).abs() < 1e-6);
    let oracle = 10.0 * (1.0 - 2.0 * 0.76 * (g - 1.0) / (2.0 * g - 1.0)).log10();
    assert!((field(&out, "noise floor: ") - oracle).abs() < 0.006);
}

#[test]
fn sweep_writes_rows_plot_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let o = mcdsim(&["simulate-sweep", &cfg, "--seed", "4", "--out", "run"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("run");
    let csv = fs::read_to_string(run.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "field_mT,eta_f_mean,eta_f_std,p_omega_W,noise_floor_dB,readout");
    assert_eq!(lines.len(), 5);
    assert!(lines[1..3].iter().all(|l| l.ends_with(",classical")));
    assert!(lines[3..].iter().all(|l| l.ends_with(",squeezed")));
    assert!(!csv.contains('\r'));

    let svg = fs::read_to_string(run.join("sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("classical") && svg.contains("squeezed"));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 4);
    assert_eq!(manifest["subcommand"], "simulate-sweep");
    assert_eq!(manifest["config"], SMALL);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn sweep_is_reproducible_and_guards_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let run = |out: &str, extra: &[&str]| {
        let mut args = vec!["simulate-sweep", cfg.as_str(), "--seed", "11", "--out", out];
        args.extend_from_slice(extra);
        mcdsim(&args, dir.path())
    };
    assert!(run("a", &[]).status.success());
    let first = fs::read(dir.path().join("a/sweep.csv")).unwrap();
    let m1: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("a/manifest.json")).unwrap()).unwrap();

    let again = run("a", &[]);
    assert_eq!(again.status.code(), Some(1));
    assert!(stderr(&again).contains("--force"));

    assert!(run("a", &["--force"]).status.success());
    assert_eq!(fs::read(dir.path().join("a/sweep.csv")).unwrap(), first);
    let m2: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(m1["config_hash"], m2["config_hash"]);

    // the manifest alone reproduces the run
    let o = mcdsim(&["simulate-sweep", "a/manifest.json", "--out", "b"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(dir.path().join("b/sweep.csv")).unwrap(), first);

    let o = mcdsim(&["simulate-sweep", &cfg, "--seed", "12", "--out", "c"], dir.path());
    assert!(o.status.success());
    assert_ne!(fs::read(dir.path().join("c/sweep.csv")).unwrap(), first);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let o = Command::new(env!("CARGO_BIN_EXE_mcdsim"))
        .args(["simulate-sweep", &cfg])
        .current_dir(dir.path())
        .env("MCDSIM_OUT_DIR", "from-env")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("from-env/sweep.csv").exists());
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    for (text, key, message) in [
        ("[sweep]\nrepeats = 1\n", "sweep.repeats", "repeats must be ≥ 2"),
        ("[sweep]\nrepeatz = 3\n", "sweep.repeatz", "unknown field"),
        ("[losses]\ndetector_efficiency = 1.2\n", "losses.detector_efficiency", "(0, 1]"),
        ("[source]\ngain = 0.5\n", "source.gain", "gain must be ≥ 1"),
    ] {
        let cfg = write_config(dir.path(), "bad.toml", text);
        let o = mcdsim(&["simulate-sweep", &cfg, "--out", "x"], dir.path());
        assert_eq!(o.status.code(), Some(1), "{text}");
        let err = stderr(&o);
        assert!(err.contains(key) && err.contains(message), "{text}: {err}");
    }
}

#[test]
fn simulated_traces_round_trip_through_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let gain = calibrate_gain(-5.0, 0.76).unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("[source]\ngain = {gain}\n{SMALL}"),
    );
    let o = mcdsim(
        &["simulate-trace", &cfg, "--seed", "2", "--out", "t", "--timeseries"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let p_dc = field(&out, "mean detected probe power: ");
    let snl_abs = field(&out, "shot-noise level per RBW: ");
    let header = fs::read_to_string(dir.path().join("t/trace.csv")).unwrap();
    assert!(header.starts_with("freq_Hz,power_dB_rel_SNL\n"));

    let analyze = |extra: &[&str]| {
        let mut args = vec!["analyze", "t/trace.csv", "--json"];
        args.extend_from_slice(extra);
        let o = mcdsim(&args, dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap()
    };
    let scalar = analyze(&["--snl-db", "0"]);
    let s = scalar["squeezing_db"].as_f64().unwrap();
    assert!((s + 5.0).abs() < 0.3, "{s}");
    let measured = analyze(&["--snl", "t/snl.csv", "--band", "40000:60000"]);
    let s = measured["squeezing_db"].as_f64().unwrap();
    assert!((s + 5.0).abs() < 0.3, "{s}");
    assert_eq!(measured["peak_frequency_hz"], 50000.0);

    let p = p_dc.to_string();
    let a = snl_abs.to_string();
    let with_eta = analyze(&["--snl-db", "0", "--pdc", &p, "--snl-abs", &a]);
    let eta = with_eta["eta_f_rad"].as_f64().unwrap();
    assert!((eta / 0.02 - 1.0).abs() < 0.01, "{eta}");

    // text and JSON report the same squeezing
    let o = mcdsim(&["analyze", "t/trace.csv", "--snl-db", "0"], dir.path());
    let text = field(&stdout(&o), "squeezing: ");
    assert!((text - scalar["squeezing_db"].as_f64().unwrap()).abs() < 0.005);

    let o = mcdsim(&["demodulate", "t/timeseries.csv", "--json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let demod: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let eta = demod["eta_f_rad"].as_f64().unwrap();
    assert!((eta / 0.02 - 1.0).abs() < 0.01, "{eta}");
    assert_eq!(demod["integration_time_s"], 0.02);
}

#[test]
fn analyze_identical_trace_and_reference() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("freq_Hz,power_dB_rel_SNL\n");
    for i in 0..41 {
        let f = 40e3 + 500.0 * i as f64;
        let db = if f == 50e3 { 20.0 } else { -3.0 + 0.1 * (i as f64).sin() };
        csv.push_str(&format!("{f},{db}\n"));
    }
    fs::write(dir.path().join("t.csv"), &csv).unwrap();
    let o = mcdsim(&["analyze", "t.csv", "--snl", "t.csv", "--json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["squeezing_db"], 0.0);
}

#[test]
fn analyze_usage_and_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("t.csv"),
        "freq_Hz,power_dB_rel_SNL\n49000,-3\n50000,10\n51000,-3\n",
    )
    .unwrap();
    let o = mcdsim(&["analyze", "t.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = mcdsim(&["analyze", "t.csv", "--snl-db", "0", "--band", "60000:40000"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--band"));

    fs::write(
        dir.path().join("bad.csv"),
        "freq_Hz,power_dB_rel_SNL\n49000,-3\n50000,x\n",
    )
    .unwrap();
    let o = mcdsim(&["analyze", "bad.csv", "--snl-db", "0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
}

#[test]
fn demodulate_recovers_a_synthetic_harmonic() {
    let dir = tempfile::tempdir().unwrap();
    // p(t) = p_dc + p_w sin(wt): eta = artanh(p_w / (2 p_dc J1(pi/2))) / 2
    let (p_dc, p_w, f, fs) = (1e-4, 2e-6, 50e3, 1e6);
    let mut csv = String::from("t_s,power_W\n");
    for i in 0..20_000 {
        let t = i as f64 / fs;
        csv.push_str(&format!(
            "{},{}\n",
            mcd_core::io::format_number(t),
            mcd_core::io::format_number(p_dc + p_w * (std::f64::consts::TAU * f * t).sin())
        ));
    }
    fs::write(dir.path().join("ts.csv"), csv).unwrap();
    let o = mcdsim(&["demodulate", "ts.csv", "--fref", "50000", "--json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["in_phase_w"].as_f64().unwrap() / p_w - 1.0).abs() < 1e-6);
    assert!((v["dc_w"].as_f64().unwrap() / p_dc - 1.0).abs() < 1e-6);
    let j1 = 0.5668240889058739;
    let oracle = 0.5 * (p_w / (2.0 * p_dc * j1)).atanh();
    assert!((v["eta_f_rad"].as_f64().unwrap() / oracle - 1.0).abs() < 1e-5);

    let o = mcdsim(&["demodulate", "ts.csv", "--tau", "1e-5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--tau"));
    let o = mcdsim(&["demodulate", "ts.csv", "--harmonic", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
