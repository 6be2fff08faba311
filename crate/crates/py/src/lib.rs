//! Python bindings: noise-floor and calibration formulas, demodulation,
//! spectrum analysis and config-driven sweeps.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use mcd_core::config::{ExperimentConfig, TEMPLATE};
use mcd_core::experiment::{self, AnalysisSettings, Readout, SnlReference};
use mcd_core::sigproc::{self, SpectrumPoint, TimeSeries};
use mcd_core::{noise, optics};

fn err(e: mcd_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn readout(label: &str) -> PyResult<Readout> {
    Readout::from_label(label)
        .ok_or_else(|| PyValueError::new_err(format!("unknown readout `{label}` (classical | squeezed)")))
}

/// Intensity-difference noise floor in dB for gain `gain` and equal arm
/// transmission `eta`.
#[pyfunction]
fn noise_floor_db(gain: f64, eta: f64) -> PyResult<f64> {
    noise::noise_floor_db(gain, eta).map_err(err)
}

/// Gain giving `target_db` of squeezing at equal arm transmission `eta`.
#[pyfunction]
fn calibrate_gain(target_db: f64, eta: f64) -> PyResult<f64> {
    experiment::calibrate_gain(target_db, eta).map_err(err)
}

/// Bessel function of the first kind, integer order.
#[pyfunction]
fn bessel_j(n: u32, x: f64) -> f64 {
    sigproc::bessel_j(n, x)
}

/// Detected power `p0 (1 - sin(delta0 sin(omega t)) tanh(2 eta_f))`.
#[pyfunction]
fn closed_form_power(p0: f64, eta_f: f64, delta0: f64, omega: f64, t: f64) -> f64 {
    optics::closed_form_power(p0, eta_f, delta0, omega, t)
}

/// Ellipticity from the signed first-harmonic amplitude and the mean power.
#[pyfunction]
fn invert_first_harmonic(p_omega: f64, p_dc: f64) -> PyResult<f64> {
    sigproc::invert_first_harmonic(p_omega, p_dc).map_err(err)
}

#[pyclass(frozen, get_all, module = "mcd_polarimetry")]
struct PhotocurrentStats {
    mean_p: f64,
    mean_c: f64,
    var_p: f64,
    var_c: f64,
    cov_pc: f64,
    noise_floor_db: f64,
}

impl From<noise::PhotocurrentStats> for PhotocurrentStats {
    fn from(s: noise::PhotocurrentStats) -> Self {
        Self {
            mean_p: s.mean_p,
            mean_c: s.mean_c,
            var_p: s.var_p,
            var_c: s.var_c,
            cov_pc: s.cov_pc,
            noise_floor_db: s.noise_floor_db(),
        }
    }
}

#[pymethods]
impl PhotocurrentStats {
    fn __repr__(&self) -> String {
        format!(
            "PhotocurrentStats(mean_p={}, mean_c={}, var_p={}, var_c={}, cov_pc={}, noise_floor_db={:.4})",
            self.mean_p, self.mean_c, self.var_p, self.var_c, self.cov_pc, self.noise_floor_db
        )
    }
}

/// Photon-number moments per sample of the two-mode source seeded with
/// `seed_photons`, after transmissions `eta_probe` and `eta_conjugate`.
#[pyfunction]
#[pyo3(signature = (gain, seed_photons, eta_probe = 1.0, eta_conjugate = 1.0))]
fn two_mode_stats(
    gain: f64,
    seed_photons: f64,
    eta_probe: f64,
    eta_conjugate: f64,
) -> PyResult<PhotocurrentStats> {
    // the wavelength and probe power do not enter the photon-number moments
    let src = noise::SqueezedSourceModel::new(gain, 1e-4, 795e-9).map_err(err)?;
    let lossless = noise::lossless_stats(&src, seed_photons).map_err(err)?;
    Ok(noise::apply_loss(&lossless, eta_probe, eta_conjugate).map_err(err)?.into())
}

#[pyclass(frozen, get_all, module = "mcd_polarimetry")]
struct HarmonicResult {
    harmonic_order: u32,
    amplitude: f64,
    phase: f64,
    integration_time: f64,
}

#[pymethods]
impl HarmonicResult {
    /// Signed component along `sin(n w t + reference_phase)`.
    #[pyo3(signature = (reference_phase = 0.0))]
    fn in_phase(&self, reference_phase: f64) -> f64 {
        self.amplitude * (self.phase - reference_phase).cos()
    }

    fn __repr__(&self) -> String {
        format!(
            "HarmonicResult(harmonic_order={}, amplitude={}, phase={}, integration_time={})",
            self.harmonic_order, self.amplitude, self.phase, self.integration_time
        )
    }
}

/// Dual-phase lock-in at `harmonic * f_ref` over the whole reference periods
/// closest to `tau`.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate, f_ref, tau, harmonic = 1))]
fn lock_in(
    samples: Vec<f64>,
    sample_rate: f64,
    f_ref: f64,
    tau: f64,
    harmonic: u32,
) -> PyResult<HarmonicResult> {
    let ts = TimeSeries::new(sample_rate, samples, 0.0).map_err(err)?;
    let h = sigproc::lock_in(&ts, f_ref, harmonic, tau).map_err(err)?;
    Ok(HarmonicResult {
        harmonic_order: h.harmonic_order,
        amplitude: h.amplitude,
        phase: h.phase,
        integration_time: h.integration_time,
    })
}

fn points(freqs: &[f64], powers_db: &[f64]) -> PyResult<Vec<SpectrumPoint>> {
    if freqs.len() != powers_db.len() {
        return Err(PyValueError::new_err("frequency and power arrays differ in length"));
    }
    Ok(freqs
        .iter()
        .zip(powers_db)
        .map(|(&frequency, &power_db)| SpectrumPoint { frequency, power_db })
        .collect())
}

#[pyclass(frozen, get_all, module = "mcd_polarimetry")]
struct TraceReport {
    squeezing_db: f64,
    band: (f64, f64),
    excluded: (f64, f64),
    points_used: usize,
    peak_frequency: f64,
    peak_db: f64,
    signal_excess: f64,
    p_omega: Option<f64>,
    eta_f: Option<f64>,
}

/// Squeezing relative to a reference trace (`snl_freqs`, `snl_db`) or a
/// flat `snl_level_db`, plus the signal peak and optional ellipticity.
#[pyfunction]
#[pyo3(signature = (
    freqs, powers_db, *, snl_freqs = None, snl_db = None, snl_level_db = None,
    band = None, modulation_frequency = 50e3, peak_halfwidth = 1e3, p_dc = None, snl_power = None
))]
#[allow(clippy::too_many_arguments)]
fn analyze_trace(
    freqs: Vec<f64>,
    powers_db: Vec<f64>,
    snl_freqs: Option<Vec<f64>>,
    snl_db: Option<Vec<f64>>,
    snl_level_db: Option<f64>,
    band: Option<(f64, f64)>,
    modulation_frequency: f64,
    peak_halfwidth: f64,
    p_dc: Option<f64>,
    snl_power: Option<f64>,
) -> PyResult<TraceReport> {
    let trace = points(&freqs, &powers_db)?;
    let reference = match (snl_freqs, snl_db, snl_level_db) {
        (Some(f), Some(p), None) => SnlReference::Trace(points(&f, &p)?),
        (None, None, Some(level)) => SnlReference::Level(level),
        _ => {
            return Err(PyValueError::new_err(
                "give either snl_freqs and snl_db, or snl_level_db",
            ))
        }
    };
    let settings = AnalysisSettings {
        band,
        modulation_frequency,
        peak_halfwidth,
        p_dc,
        snl_power,
    };
    let r = experiment::analyze_trace(&trace, &reference, &settings).map_err(err)?;
    Ok(TraceReport {
        squeezing_db: r.squeezing_db,
        band: r.band,
        excluded: r.excluded,
        points_used: r.points_used,
        peak_frequency: r.peak_frequency,
        peak_db: r.peak_db,
        signal_excess: r.signal_excess,
        p_omega: r.p_omega,
        eta_f: r.eta_f,
    })
}

#[pyclass(frozen, get_all, module = "mcd_polarimetry")]
struct SweepPoint {
    /// Tesla.
    field: f64,
    mean_eta_f: f64,
    std_eta_f: f64,
    p_omega: f64,
    noise_floor_db: f64,
}

#[pyclass(frozen, module = "mcd_polarimetry")]
struct SweepResult {
    inner: mcd_core::SweepResult,
}

#[pymethods]
impl SweepResult {
    #[getter]
    fn readout(&self) -> &'static str {
        self.inner.readout.label()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn repeats(&self) -> usize {
        self.inner.repeats
    }

    #[getter]
    fn points(&self) -> Vec<SweepPoint> {
        self.inner
            .points
            .iter()
            .map(|p| SweepPoint {
                field: p.field,
                mean_eta_f: p.mean_eta_f,
                std_eta_f: p.std_eta_f,
                p_omega: p.p_omega,
                noise_floor_db: p.noise_floor_db,
            })
            .collect()
    }

    /// Mean of the per-field error bars.
    fn mean_std(&self) -> f64 {
        self.inner.mean_std()
    }

    /// The sweep in the CSV format written by the command-line tool.
    fn to_csv(&self) -> String {
        mcd_core::io::sweep_csv(std::slice::from_ref(&self.inner))
    }
}

#[pyclass(frozen, get_all, module = "mcd_polarimetry")]
struct SimulatedTrace {
    frequencies: Vec<f64>,
    /// dB relative to `snl_power`.
    powers_db: Vec<f64>,
    snl_power: f64,
    p_dc: f64,
}

/// A validated experiment configuration.
#[pyclass(frozen, module = "mcd_polarimetry")]
struct Experiment {
    cfg: ExperimentConfig,
}

impl Experiment {
    fn seed(&self, seed: Option<u64>) -> u64 {
        seed.unwrap_or(self.cfg.seed)
    }
}

#[pymethods]
impl Experiment {
    /// Parses TOML config text; an empty string gives the defaults.
    #[new]
    #[pyo3(signature = (toml = ""))]
    fn new(toml: &str) -> PyResult<Self> {
        Ok(Self {
            cfg: ExperimentConfig::from_toml_str(toml).map_err(err)?,
        })
    }

    /// The annotated default config.
    #[staticmethod]
    fn template() -> &'static str {
        TEMPLATE
    }

    #[getter]
    fn gain(&self) -> PyResult<f64> {
        self.cfg.gain().map_err(err)
    }

    #[getter]
    fn readouts(&self) -> PyResult<Vec<&'static str>> {
        Ok(self.cfg.readouts().map_err(err)?.iter().map(|r| r.label()).collect())
    }

    /// Noise floor of the detected difference channel for `readout`.
    #[pyo3(signature = (readout = "squeezed"))]
    fn noise_floor_db(&self, readout: &str) -> PyResult<f64> {
        let sweep = self.cfg.sweep_config(self::readout(readout)?, self.cfg.seed).map_err(err)?;
        Ok(experiment::detection_setup(&sweep).map_err(err)?.noise_floor_db())
    }

    /// Noiseless detected probe power at field `field_mt` and time `t`.
    fn detector_power(&self, field_mt: f64, t: f64) -> PyResult<f64> {
        let sweep = self.cfg.sweep_config(Readout::Squeezed, self.cfg.seed).map_err(err)?;
        let setup = experiment::detection_setup(&sweep).map_err(err)?;
        let b = field_mt * 1e-3;
        let mut train = sweep
            .train
            .with_sample_response(sweep.material.theta_at(b), sweep.material.eta_at(b))
            .map_err(err)?;
        train.input_power = setup.probe_input_power;
        Ok(optics::detector_power(&train, t))
    }

    /// Monte Carlo field sweep; `seed` defaults to the config's.
    #[pyo3(signature = (readout = "squeezed", seed = None))]
    fn run_sweep(&self, py: Python<'_>, readout: &str, seed: Option<u64>) -> PyResult<SweepResult> {
        let sweep = self
            .cfg
            .sweep_config(self::readout(readout)?, self.seed(seed))
            .map_err(err)?;
        let inner = py.detach(|| mcd_core::run_sweep(&sweep)).map_err(err)?;
        Ok(SweepResult { inner })
    }

    /// Spectrum-analyzer trace of the difference channel at `field_mt`
    /// (default: the config's spectrum field).
    #[pyo3(signature = (readout = "squeezed", field_mt = None, seed = None))]
    fn simulate_trace(
        &self,
        py: Python<'_>,
        readout: &str,
        field_mt: Option<f64>,
        seed: Option<u64>,
    ) -> PyResult<SimulatedTrace> {
        let sweep = self
            .cfg
            .sweep_config(self::readout(readout)?, self.seed(seed))
            .map_err(err)?;
        let field = field_mt.unwrap_or(self.cfg.spectrum.field_mt) * 1e-3;
        let settings = self.cfg.spectrum_settings();
        let duration = self.cfg.spectrum.duration_s;
        let sim = py
            .detach(|| experiment::simulate_trace(&sweep, field, 0, &settings, duration))
            .map_err(err)?;
        Ok(SimulatedTrace {
            frequencies: sim.trace.points.iter().map(|p| p.frequency).collect(),
            powers_db: sim.trace.points.iter().map(|p| p.power_db).collect(),
            snl_power: sim.snl_power,
            p_dc: sim.p_dc,
        })
    }
}

#[pymodule]
fn mcd_polarimetry(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(noise_floor_db, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_gain, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_j, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_power, m)?)?;
    m.add_function(wrap_pyfunction!(invert_first_harmonic, m)?)?;
    m.add_function(wrap_pyfunction!(two_mode_stats, m)?)?;
    m.add_function(wrap_pyfunction!(lock_in, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_trace, m)?)?;
    m.add_class::<PhotocurrentStats>()?;
    m.add_class::<HarmonicResult>()?;
    m.add_class::<TraceReport>()?;
    m.add_class::<SweepPoint>()?;
    m.add_class::<SweepResult>()?;
    m.add_class::<SimulatedTrace>()?;
    m.add_class::<Experiment>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
