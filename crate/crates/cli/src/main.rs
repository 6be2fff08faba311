// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod output;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use mcd_core::config::ExperimentConfig;
use mcd_core::experiment::{
    analyze_trace, detection_setup, run_sweep, simulate_trace, AnalysisSettings, Readout,
    SnlReference,
};
use mcd_core::io::{
    format_number, read_timeseries_file, read_trace_file, sweep_csv, timeseries_csv, trace_csv,
};
use mcd_core::sigproc::{dc_level, invert_first_harmonic, lock_in, TimeSeries};
use mcd_core::{noise_floor_db, Error};
use serde::Serialize;

use output::{load_config_source, prepare_out_dir, resolve_out_dir, write_atomic, RunManifest};

/// Failure with its exit status: 2 for bad flags, 1 for everything else.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn run(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::run(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "mcdsim", version, about = "Squeezed-light magnetic circular dichroism polarimetry simulator")]
struct Cli {
    /// Master seed; overrides the seed in a config or manifest.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Intensity-difference noise floor of the two-mode source after loss.
    #[command(group(ArgGroup::new("mode").required(true).args(["gain", "budget", "sweep"])))]
    NoiseFloor {
        /// Amplifier gain, ≥ 1.
        #[arg(long, requires = "eta", allow_negative_numbers = true)]
        gain: Option<f64>,
        /// Equal transmission of both arms, in (0, 1].
        #[arg(long, requires = "gain", allow_negative_numbers = true)]
        eta: Option<f64>,
        /// Experiment config whose source and loss budget set the floor.
        #[arg(long, conflicts_with_all = ["gain", "sweep"])]
        budget: Option<PathBuf>,
        /// Write a gain by transmission grid of floors to this CSV.
        #[arg(long, conflicts_with = "gain")]
        sweep: Option<PathBuf>,
    },
    /// Monte Carlo field sweep for each configured readout.
    SimulateSweep {
        /// Experiment config (TOML) or a previous run's manifest.json.
        config: PathBuf,
        /// Output directory [default: $MCDSIM_OUT_DIR or ./out].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overwrite existing outputs.
        #[arg(long)]
        force: bool,
    },
    /// Synthetic spectrum-analyzer trace of the difference channel.
    SimulateTrace {
        /// Experiment config (TOML) or a previous run's manifest.json.
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
        /// Readout whose noise statistics are simulated.
        #[arg(long, default_value = "squeezed")]
        readout: String,
        /// Field in mT [default: spectrum.field_mt from the config].
        #[arg(long, allow_negative_numbers = true)]
        field_mt: Option<f64>,
        /// Also write the leading part of the detected probe-power record.
        #[arg(long)]
        timeseries: bool,
        /// Samples written with --timeseries.
        #[arg(long, default_value_t = 20_000)]
        timeseries_samples: usize,
    },
    /// Squeezing, signal and ellipticity from a spectrum trace.
    #[command(group(ArgGroup::new("reference").required(true).args(["snl", "snl_db"])))]
    Analyze {
        /// Trace CSV (freq_Hz,power_dB_rel_SNL).
        trace: PathBuf,
        /// Shot-noise reference trace CSV.
        #[arg(long)]
        snl: Option<PathBuf>,
        /// Flat shot-noise level in the trace's dB units.
        #[arg(long, allow_negative_numbers = true)]
        snl_db: Option<f64>,
        /// Analysis band in Hz, LO:HI.
        #[arg(long, value_parser = parse_band)]
        band: Option<(f64, f64)>,
        /// Modulation frequency, Hz.
        #[arg(long, default_value_t = 50e3)]
        fmod: f64,
        /// Half-width around the modulation frequency excluded from the noise estimate, Hz.
        #[arg(long, default_value_t = 1e3)]
        peak_halfwidth: f64,
        /// Mean detected probe power, W; enables the ellipticity estimate.
        #[arg(long)]
        pdc: Option<f64>,
        /// Absolute power of the 0 dB level, W^2.
        #[arg(long)]
        snl_abs: Option<f64>,
        /// Print the JSON summary instead of the text report.
        #[arg(long)]
        json: bool,
    },
    /// Lock-in demodulation of a time-series CSV (t_s,power_W).
    Demodulate {
        series: PathBuf,
        /// Reference frequency, Hz.
        #[arg(long, default_value_t = 50e3)]
        fref: f64,
        #[arg(long, default_value_t = 1)]
        harmonic: u32,
        /// Integration time, s [default: whole periods in the record].
        #[arg(long)]
        tau: Option<f64>,
        /// Reference phase, rad, for the signed in-phase component.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        phase: f64,
        /// Mean probe power for the ellipticity inversion [default: DC level of the record].
        #[arg(long)]
        pdc: Option<f64>,
        #[arg(long)]
        json: bool,
    },
}

fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("LO: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("HI: {e}"))?;
    if lo < hi {
        Ok((lo, hi))
    } else {
        Err("LO must be below HI".into())
    }
}

/// Two decimals, without a negative zero.
fn db2(x: f64) -> String {
    format!("{:.2}", if x.abs() < 0.005 { 0.0 } else { x })
}

fn noise_floor_cmd(
    gain: Option<f64>,
    eta: Option<f64>,
    budget: Option<PathBuf>,
    sweep: Option<PathBuf>,
) -> CliResult {
    if let (Some(g), Some(eta)) = (gain, eta) {
        if !(g >= 1.0 && g.is_finite()) {
            return Err(CliError::usage(format!("--gain {g}: gain must be ≥ 1")));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(CliError::usage(format!("--eta {eta}: transmission must lie in (0, 1]")));
        }
        let db = noise_floor_db(g, eta)?;
        println!("noise floor: {} dB", db2(db));
        println!("linear variance (rel. shot noise): {}", format_number(10f64.powf(db / 10.0)));
    }
    if let Some(path) = budget {
        let text = read_text(&path)?;
        let cfg = ExperimentConfig::from_toml_str(&text)?;
        let setup = detection_setup(&cfg.sweep_config(Readout::Squeezed, cfg.seed)?)?;
        let db = setup.noise_floor_db();
        println!("gain: {}", format_number(cfg.gain()?));
        println!("probe transmission: {}", format_number(setup.eta_probe));
        println!("conjugate transmission: {}", format_number(setup.eta_conjugate));
        println!("conjugate ND transmission: {}", format_number(cfg.conjugate_nd()?));
        println!("noise floor: {} dB", db2(db));
        println!("linear variance (rel. shot noise): {}", format_number(10f64.powf(db / 10.0)));
    }
    if let Some(path) = sweep {
        let mut csv = String::from("gain,eta,noise_floor_dB\n");
        for i in 0..=16 {
            let g = 1.0 + 0.25 * i as f64;
            for j in 0..=10 {
                let eta = 0.5 + 0.05 * j as f64;
                let db = noise_floor_db(g, eta)?;
                csv.push_str(&format!(
                    "{},{},{}\n",
                    format_number(g),
                    format_number(eta),
                    format_number(db)
                ));
            }
        }
        write_atomic(&path, csv.as_bytes())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::run(format!("cannot read {}: {e}", path.display())))
}

/// Parses config text from a file or manifest and settles the master seed:
/// flag, then manifest, then the config's own `seed`.
fn load_config(path: &Path, seed_flag: Option<u64>) -> CliResult<(String, ExperimentConfig, u64)> {
    let (text, manifest_seed) = load_config_source(path)?;
    let cfg = ExperimentConfig::from_toml_str(&text)
        .map_err(|e| CliError::run(format!("{}: {e}", path.display())))?;
    let seed = seed_flag.or(manifest_seed).unwrap_or(cfg.seed);
    Ok((text, cfg, seed))
}

fn simulate_sweep_cmd(config: &Path, seed: Option<u64>, out: Option<PathBuf>, force: bool) -> CliResult {
    let (text, cfg, seed) = load_config(config, seed)?;
    let files = ["sweep.csv", "sweep.svg", "manifest.json"];
    let dir = resolve_out_dir(out);
    prepare_out_dir(&dir, &files, force)?;
    let results = cfg
        .readouts()?
        .into_iter()
        .map(|r| run_sweep(&cfg.sweep_config(r, seed)?))
        .collect::<Result<Vec<_>, Error>>()?;
    write_atomic(&dir.join("sweep.csv"), sweep_csv(&results).as_bytes())?;
    write_atomic(&dir.join("sweep.svg"), plot::sweep_svg(&results).as_bytes())?;
    RunManifest::new("simulate-sweep", &text, seed, &files[..2]).write(&dir)?;
    for r in &results {
        println!(
            "{}: {} fields x {} repeats, noise floor {} dB, mean error bar {}",
            r.readout.label(),
            r.points.len(),
            r.repeats,
            db2(r.points[0].noise_floor_db),
            format_number(r.mean_std())
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate_trace_cmd(
    config: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    force: bool,
    readout: &str,
    field_mt: Option<f64>,
    timeseries: bool,
    timeseries_samples: usize,
) -> CliResult {
    let readout = Readout::from_label(readout).ok_or_else(|| {
        CliError::usage(format!("--readout `{readout}`: expected classical or squeezed"))
    })?;
    let (text, cfg, seed) = load_config(config, seed)?;
    let mut files = vec!["trace.csv", "snl.csv", "manifest.json"];
    if timeseries {
        files.push("timeseries.csv");
    }
    let dir = resolve_out_dir(out);
    prepare_out_dir(&dir, &files, force)?;

    let field = field_mt.unwrap_or(cfg.spectrum.field_mt) * 1e-3;
    let settings = cfg.spectrum_settings();
    let duration = cfg.spectrum.duration_s;
    let sim = simulate_trace(&cfg.sweep_config(readout, seed)?, field, 0, &settings, duration)?;
    // coherent light at the same detected powers, same deviates
    let snl = simulate_trace(
        &cfg.sweep_config(Readout::ClassicalBalanced, seed)?,
        field,
        0,
        &settings,
        duration,
    )?;
    write_atomic(&dir.join("trace.csv"), trace_csv(&sim.trace.points).as_bytes())?;
    write_atomic(&dir.join("snl.csv"), trace_csv(&snl.trace.points).as_bytes())?;
    if timeseries {
        let n = timeseries_samples.min(sim.probe.len());
        let head = TimeSeries::new(sim.probe.sample_rate, sim.probe.samples[..n].to_vec(), 0.0)?;
        write_atomic(&dir.join("timeseries.csv"), timeseries_csv(&head).as_bytes())?;
    }
    let outputs: Vec<&str> = files.iter().copied().filter(|f| *f != "manifest.json").collect();
    RunManifest::new("simulate-trace", &text, seed, &outputs).write(&dir)?;
    println!("readout: {}", readout.label());
    println!("field: {} mT", format_number(field * 1e3));
    println!("mean detected probe power: {} W", format_number(sim.p_dc));
    println!("shot-noise level per RBW: {} W^2", format_number(sim.snl_power));
    println!("wrote {}", dir.display());
    Ok(())
}

#[derive(Serialize)]
struct AnalysisSummary {
    squeezing_db: f64,
    band_hz: [f64; 2],
    points_used: usize,
    excluded_hz: [f64; 2],
    peak_frequency_hz: f64,
    peak_db: f64,
    signal_excess: f64,
    p_omega_w: Option<f64>,
    eta_f_rad: Option<f64>,
}

fn read_trace_named(path: &Path) -> CliResult<Vec<mcd_core::sigproc::SpectrumPoint>> {
    read_trace_file(path).map_err(|e| CliError::run(format!("{}: {e}", path.display())))
}

#[allow(clippy::too_many_arguments)]
fn analyze_cmd(
    trace: &Path,
    snl: Option<PathBuf>,
    snl_db: Option<f64>,
    band: Option<(f64, f64)>,
    fmod: f64,
    peak_halfwidth: f64,
    pdc: Option<f64>,
    snl_abs: Option<f64>,
    json: bool,
) -> CliResult {
    let points = read_trace_named(trace)?;
    let reference = match (snl, snl_db) {
        (Some(path), _) => SnlReference::Trace(read_trace_named(&path)?),
        (None, Some(db)) => SnlReference::Level(db),
        (None, None) => return Err(CliError::usage("one of --snl or --snl-db is required")),
    };
    let settings = AnalysisSettings {
        band,
        modulation_frequency: fmod,
        peak_halfwidth,
        p_dc: pdc,
        snl_power: snl_abs,
    };
    let r = analyze_trace(&points, &reference, &settings)?;
    let summary = AnalysisSummary {
        squeezing_db: r.squeezing_db,
        band_hz: [r.band.0, r.band.1],
        points_used: r.points_used,
        excluded_hz: [r.excluded.0, r.excluded.1],
        peak_frequency_hz: r.peak_frequency,
        peak_db: r.peak_db,
        signal_excess: r.signal_excess,
        p_omega_w: r.p_omega,
        eta_f_rad: r.eta_f,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        return Ok(());
    }
    println!("squeezing: {} dB", db2(r.squeezing_db));
    println!(
        "band: {} to {} Hz ({} points)",
        format_number(r.band.0),
        format_number(r.band.1),
        r.points_used
    );
    println!(
        "excluded around peak: {} to {} Hz",
        format_number(r.excluded.0),
        format_number(r.excluded.1)
    );
    println!(
        "signal peak: {} dB at {} Hz ({}x noise floor)",
        db2(r.peak_db),
        format_number(r.peak_frequency),
        format_number(r.signal_excess)
    );
    match (r.p_omega, r.eta_f) {
        (Some(p), Some(eta)) => {
            println!("first-harmonic amplitude: {} W", format_number(p));
            println!("ellipticity: {} rad", format_number(eta));
        }
        _ => println!("ellipticity: not computed (needs --pdc, and --snl-abs for SNL-referenced traces)"),
    }
    Ok(())
}

#[derive(Serialize)]
struct DemodSummary {
    harmonic: u32,
    integration_time_s: f64,
    amplitude_w: f64,
    phase_rad: f64,
    in_phase_w: f64,
    quadrature_w: f64,
    dc_w: f64,
    eta_f_rad: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn demodulate_cmd(
    series: &Path,
    fref: f64,
    harmonic: u32,
    tau: Option<f64>,
    phase: f64,
    pdc: Option<f64>,
    json: bool,
) -> CliResult {
    if harmonic == 0 {
        return Err(CliError::usage("--harmonic: order must be ≥ 1"));
    }
    if !(fref > 0.0) {
        return Err(CliError::usage(format!("--fref {fref}: must be > 0")));
    }
    let ts = read_timeseries_file(series)
        .map_err(|e| CliError::run(format!("{}: {e}", series.display())))?;
    let tau = tau.unwrap_or_else(|| (ts.duration() * fref).floor() / fref);
    let h = lock_in(&ts, fref, harmonic, tau).map_err(|e| match e {
        Error::InvalidParameter { .. } => CliError::usage(format!("--tau: {e}")),
        other => other.into(),
    })?;
    let dc = dc_level(&ts, fref, tau)?;
    let in_phase = h.in_phase(phase);
    let eta = if harmonic == 1 {
        Some(invert_first_harmonic(in_phase, pdc.unwrap_or(dc))?)
    } else {
        None
    };
    let summary = DemodSummary {
        harmonic,
        integration_time_s: h.integration_time,
        amplitude_w: h.amplitude,
        phase_rad: h.phase,
        in_phase_w: in_phase,
        quadrature_w: h.quadrature(phase),
        dc_w: dc,
        eta_f_rad: eta,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        return Ok(());
    }
    println!("harmonic: {harmonic}");
    println!("integration time: {} s", format_number(h.integration_time));
    println!("amplitude: {} W", format_number(h.amplitude));
    println!("phase: {} rad", format_number(h.phase));
    println!("in-phase: {} W", format_number(in_phase));
    println!("quadrature: {} W", format_number(summary.quadrature_w));
    println!("dc level: {} W", format_number(dc));
    if let Some(eta) = eta {
        println!("ellipticity: {} rad", format_number(eta));
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let seed = cli.seed;
    match cli.command {
        Command::NoiseFloor { gain, eta, budget, sweep } => noise_floor_cmd(gain, eta, budget, sweep),
        Command::SimulateSweep { config, out, force } => simulate_sweep_cmd(&config, seed, out, force),
        Command::SimulateTrace {
            config,
            out,
            force,
            readout,
            field_mt,
            timeseries,
            timeseries_samples,
        } => simulate_trace_cmd(
            &config,
            seed,
            out,
            force,
            &readout,
            field_mt,
            timeseries,
            timeseries_samples,
        ),
        Command::Analyze {
            trace,
            snl,
            snl_db,
            band,
            fmod,
            peak_halfwidth,
            pdc,
            snl_abs,
            json,
        } => analyze_cmd(&trace, snl, snl_db, band, fmod, peak_halfwidth, pdc, snl_abs, json),
        Command::Demodulate {
            series,
            fref,
            harmonic,
            tau,
            phase,
            pdc,
            json,
        } => demodulate_cmd(&series, fref, harmonic, tau, phase, pdc, json),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
