//! Swept spectrum-analyzer emulation.
//!
//! For every display point the record is passed through a Gaussian
//! resolution filter centred on that frequency, converted to a complex
//! envelope, square-law (RMS) detected and smoothed by a single-pole video
//! filter. The displayed value is the time average of the video output, so
//! the reading is the mean power in the resolution bandwidth:
//!
//! - a tone of RMS power `Q` at the centre frequency reads `Q`;
//! - white noise of one-sided density `N1` reads `N1 * rbw`.
//!
//! Filtering is done in the frequency domain on a single FFT of the record.
//! The record is first tapered by a power-normalized Hann window; without
//! it a tone that is not periodic in the record leaks across the whole span
//! far above the noise, which a swept analog filter would not show.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::TimeSeries;
use crate::{Error, Result};

/// Half-width of the resolution filter support in units of its sigma.
const FILTER_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSettings {
    pub center: f64,
    pub span: f64,
    /// Equivalent noise bandwidth of the Gaussian resolution filter, Hz.
    pub rbw: f64,
    /// Single-pole video bandwidth, Hz.
    pub vbw: f64,
    pub points: usize,
    /// Linear power that maps to 0 dB.
    pub reference: f64,
    /// Reported level for zero (or sub-floor) power.
    pub floor_db: f64,
}

impl SpectrumSettings {
    pub fn new(center: f64, span: f64, rbw: f64, vbw: f64) -> Self {
        Self {
            center,
            span,
            rbw,
            vbw,
            points: 101,
            reference: 1.0,
            floor_db: -300.0,
        }
    }

    pub fn with_points(mut self, points: usize) -> Self {
        self.points = points;
        self
    }

    pub fn with_reference(mut self, reference: f64) -> Self {
        self.reference = reference;
        self
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let lo = self.center - self.span / 2.0;
        let step = self.span / (self.points - 1) as f64;
        (0..self.points).map(|i| lo + step * i as f64).collect()
    }

    fn sigma(&self) -> f64 {
        self.rbw / TAU.sqrt()
    }

    fn validate(&self, ts: &TimeSeries) -> Result<()> {
        if !(self.rbw > 0.0) || !(self.vbw > 0.0) {
            return Err(Error::InvalidBand("rbw and vbw must be > 0".into()));
        }
        if !(self.span > 0.0) || self.points < 2 {
            return Err(Error::InvalidBand("span must be > 0 with ≥ 2 points".into()));
        }
        if self.rbw < self.span / 1e4 {
            return Err(Error::InvalidBand(format!(
                "rbw {} Hz below span/1e4",
                self.rbw
            )));
        }
        if !(self.reference > 0.0) {
            return Err(Error::InvalidBand("reference power must be > 0".into()));
        }
        let margin = FILTER_SIGMAS * self.sigma();
        let lo = self.center - self.span / 2.0 - margin;
        let hi = self.center + self.span / 2.0 + margin;
        let nyquist = ts.sample_rate / 2.0;
        if lo <= 0.0 || hi >= nyquist {
            return Err(Error::InvalidBand(format!(
                "band [{lo}, {hi}] Hz (with filter skirts) must lie inside (0, {nyquist}) Hz"
            )));
        }
        let resolution = ts.sample_rate / ts.len() as f64;
        if resolution > self.rbw / 4.0 {
            return Err(Error::InvalidBand(format!(
                "record too short: bin spacing {resolution} Hz exceeds rbw/4"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    pub frequency: f64,
    pub power_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    pub center: f64,
    pub span: f64,
    pub rbw: f64,
    pub vbw: f64,
    /// Linear power of the 0 dB level.
    pub reference: f64,
    pub points: Vec<SpectrumPoint>,
}

impl SpectrumTrace {
    /// Linear powers (same units as `reference`).
    pub fn linear_powers(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| self.reference * 10f64.powf(p.power_db / 10.0))
            .collect()
    }

    pub fn peak(&self) -> SpectrumPoint {
        *self
            .points
            .iter()
            .max_by(|a, b| a.power_db.total_cmp(&b.power_db))
            .expect("trace has points")
    }

    /// Re-expresses the trace relative to a new 0 dB power.
    pub fn rereferenced(&self, reference: f64) -> SpectrumTrace {
        let shift = 10.0 * (self.reference / reference).log10();
        SpectrumTrace {
            reference,
            points: self
                .points
                .iter()
                .map(|p| SpectrumPoint {
                    frequency: p.frequency,
                    power_db: p.power_db + shift,
                })
                .collect(),
            ..self.clone()
        }
    }
}

fn to_db(power: f64, settings: &SpectrumSettings) -> f64 {
    if power > 0.0 {
        (10.0 * (power / settings.reference).log10()).max(settings.floor_db)
    } else {
        settings.floor_db
    }
}

/// RMS-detected, video-averaged power through the resolution filter at each
/// display frequency.
pub fn spectrum(ts: &TimeSeries, settings: &SpectrumSettings) -> Result<SpectrumTrace> {
    settings.validate(ts)?;
    let n = ts.len();
    // sin^2 window; mean square 3/8
    let norm = (8.0f64 / 3.0).sqrt();
    let mut buf: Vec<Complex64> = ts
        .samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let w = (std::f64::consts::PI * i as f64 / n as f64).sin().powi(2);
            Complex64::new(x * w * norm, 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let spectrum = buf;

    let df = ts.sample_rate / n as f64;
    let sigma = settings.sigma();
    let half_width = FILTER_SIGMAS * sigma;
    let max_bins = (2.0 * half_width / df).ceil() as usize + 2;
    let envelope_len = (2 * max_bins).next_power_of_two().max(64);
    let inverse: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(envelope_len);
    let envelope_rate = envelope_len as f64 / ts.duration();
    let alpha = 1.0 - (-TAU * settings.vbw / envelope_rate).exp();

    let points = settings
        .frequencies()
        .par_iter()
        .map(|&fc| {
            let k_lo = ((fc - half_width) / df).ceil().max(1.0) as usize;
            let k_hi = (((fc + half_width) / df).floor() as usize).min(n / 2 - 1);
            let mut env = vec![Complex64::new(0.0, 0.0); envelope_len];
            for k in k_lo..=k_hi {
                let offset = k as f64 * df - fc;
                let gain = (-offset * offset / (4.0 * sigma * sigma)).exp();
                env[(k - k_lo) % envelope_len] = spectrum[k] * (2.0 * gain / n as f64);
            }
            inverse.process(&mut env);
            let detected: Vec<f64> = env.iter().map(|z| 0.5 * z.norm_sqr()).collect();
            // the envelope is periodic in the record length: one pass to reach
            // the periodic steady state, a second to average
            let mut video = detected[0];
            for &p in &detected {
                video += alpha * (p - video);
            }
            let mut acc = 0.0;
            for &p in &detected {
                video += alpha * (p - video);
                acc += video;
            }
            SpectrumPoint {
                frequency: fc,
                power_db: to_db(acc / envelope_len as f64, settings),
            }
        })
        .collect();

    Ok(SpectrumTrace {
        center: settings.center,
        span: settings.span,
        rbw: settings.rbw,
        vbw: settings.vbw,
        reference: settings.reference,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const FS: f64 = 1e6;
    const N: usize = 1 << 20;

    fn tone(amp: f64, f: f64, phase: f64) -> TimeSeries {
        TimeSeries::new(
            FS,
            (0..N)
                .map(|i| amp * (TAU * f * i as f64 / FS + phase).sin())
                .collect(),
            0.0,
        )
        .unwrap()
    }

    fn paper_settings() -> SpectrumSettings {
        SpectrumSettings::new(50e3, 20e3, 3e3, 300.0).with_points(81)
    }

    #[test]
    fn non_periodic_tone_does_not_leak_across_the_span() {
        // 13107.2 cycles in the record
        let trace = spectrum(&tone(1.0, 50e3, 0.0), &paper_settings()).unwrap();
        let peak = trace.peak().power_db;
        let edge = trace.points.first().unwrap().power_db.max(trace.points.last().unwrap().power_db);
        assert!(peak - edge > 120.0, "peak {peak} dB, edge {edge} dB");
    }

    #[test]
    fn tone_reads_its_rms_power() {
        let amp = 2e-3;
        let trace = spectrum(&tone(amp, 50e3, 0.3), &paper_settings()).unwrap();
        let peak = trace.peak();
        assert!((peak.frequency - 50e3).abs() < 1e-6);
        let q_db = 10.0 * (amp * amp / 2.0).log10();
        assert!((peak.power_db - q_db).abs() < 0.3, "{} vs {}", peak.power_db, q_db);
    }

    #[test]
    fn tone_reading_independent_of_phase() {
        let settings = paper_settings();
        let readings: Vec<f64> = (0..8)
            .map(|k| {
                let trace = spectrum(&tone(1.0, 50e3, k as f64 * TAU / 8.0), &settings).unwrap();
                trace.peak().power_db
            })
            .collect();
        let lo = readings.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = readings.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo < 0.05);
    }

    #[test]
    fn white_noise_reads_density_times_rbw() {
        let sigma = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let normal = Normal::new(0.0, sigma).unwrap();
        let ts = TimeSeries::new(FS, (0..N).map(|_| normal.sample(&mut rng)).collect(), 0.0).unwrap();
        let settings = paper_settings();
        let trace = spectrum(&ts, &settings).unwrap();
        let one_sided = 2.0 * sigma * sigma / FS;
        let expect_db = 10.0 * (one_sided * settings.rbw).log10();
        for p in &trace.points {
            assert!((p.power_db - expect_db).abs() < 0.5, "{p:?} vs {expect_db}");
        }
    }

    #[test]
    fn silence_reads_the_floor() {
        let ts = TimeSeries::new(FS, vec![0.0; 1 << 16], 0.0).unwrap();
        let settings = SpectrumSettings::new(50e3, 10e3, 3e3, 300.0).with_points(11);
        let trace = spectrum(&ts, &settings).unwrap();
        assert!(trace.points.iter().all(|p| p.power_db == settings.floor_db));
    }

    #[test]
    fn invalid_bands() {
        let ts = TimeSeries::new(FS, vec![0.0; 1 << 16], 0.0).unwrap();
        let bad = [
            SpectrumSettings::new(50e3, 10e3, 0.0, 300.0),
            SpectrumSettings::new(50e3, 10e3, 3e3, 0.0),
            SpectrumSettings::new(495e3, 10e3, 3e3, 300.0),
            SpectrumSettings::new(5e3, 10e3, 3e3, 300.0),
            SpectrumSettings::new(50e3, 10e3, 0.5, 0.1),
            SpectrumSettings::new(50e3, 10e3, 3e3, 300.0).with_points(1),
        ];
        for s in bad {
            assert!(matches!(spectrum(&ts, &s), Err(Error::InvalidBand(_))), "{s:?}");
        }
        let short = TimeSeries::new(FS, vec![0.0; 512], 0.0).unwrap();
        assert!(spectrum(&short, &SpectrumSettings::new(50e3, 10e3, 3e3, 300.0)).is_err());
    }

    #[test]
    fn deterministic_across_runs() {
        let ts = tone(1.0, 48e3, 0.1);
        let s = paper_settings();
        assert_eq!(spectrum(&ts, &s).unwrap(), spectrum(&ts, &s).unwrap());
    }
}
