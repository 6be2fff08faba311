use super::{detection_setup, SweepConfig};
use crate::noise::derive_seed;
use crate::sigproc::synth::{add_noise, check_sampling, waveform};
use crate::sigproc::{dc_level, spectrum, SpectrumSettings, SpectrumTrace, TimeSeries};
use crate::{Error, Result};

/// Seed path component for spectrum records, distinct from sweep units.
const TRACE_STREAM: u64 = 0x7472_6163_6500;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedTrace {
    /// Difference-channel spectrum in dB relative to `snl_power`.
    pub trace: SpectrumTrace,
    /// Shot-noise power read in one resolution bandwidth, W^2.
    pub snl_power: f64,
    /// Mean detected probe power, W.
    pub p_dc: f64,
    /// The difference-channel record that was analyzed.
    pub difference: TimeSeries,
    /// The detected probe-power record.
    pub probe: TimeSeries,
}

/// Synthesizes one difference-channel record of `duration` seconds at
/// `field` and passes it through the spectrum analyzer.
///
/// The 0 dB level is the analytic shot-noise reading: the one-sided density
/// of the coherent difference channel at the same detected powers, times
/// the resolution bandwidth. The record seed depends only on the master seed
/// and `field_index`, so traces of different readouts share their deviates.
pub fn simulate_trace(
    cfg: &SweepConfig,
    field: f64,
    field_index: u64,
    settings: &SpectrumSettings,
    duration: f64,
) -> Result<SimulatedTrace> {
    cfg.source.validate()?;
    cfg.losses.validate()?;
    cfg.material.validate()?;
    let setup = detection_setup(cfg)?;
    let fs = cfg.demod.sample_rate;
    let mut train = cfg
        .train
        .with_sample_response(cfg.material.theta_at(field), cfg.material.eta_at(field))
        .map_err(|e| Error::AtField {
            field_tesla: field,
            source: Box::new(e),
        })?;
    train.input_power = setup.probe_input_power;
    train.validate()?;
    let n = check_sampling(&train, fs, duration)?;
    let noise = if cfg.noiseless { None } else { Some(&setup.noise) };
    let seed = derive_seed(cfg.seed, &[TRACE_STREAM, field_index]);
    let (probe, conj) = add_noise(&waveform(&train, fs, n), noise, seed)?;
    let probe = TimeSeries::new(fs, probe, 0.0)?;
    let difference = probe.difference(&TimeSeries::new(fs, conj, 0.0)?)?;
    let snl_power = 2.0 * setup.noise.shot_noise_variance() / fs * settings.rbw;
    let trace = spectrum(&difference, &settings.with_reference(snl_power))?;
    let f = train.pem.frequency;
    let p_dc = dc_level(&probe, f, (probe.duration() * f).floor() / f)?;
    Ok(SimulatedTrace {
        trace,
        snl_power,
        p_dc,
        difference,
        probe,
    })
}
