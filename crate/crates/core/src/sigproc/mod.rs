//! Detector time series, demodulation and spectrum-analyzer emulation.
//!
//! Photocurrents are carried in optical-watt-equivalent units throughout;
//! every downstream quantity is a ratio to the DC level or to the shot-noise
//! level, so detector responsivity never enters.

mod bessel;
mod lockin;
mod spectrum;
pub(crate) mod synth;

pub use bessel::bessel_j;
pub use lockin::{dc_level, invert_first_harmonic, lock_in, HarmonicResult};
pub use spectrum::{spectrum, SpectrumPoint, SpectrumSettings, SpectrumTrace};
pub use synth::{synthesize, DetectionNoise};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
    pub start_time: f64,
}

impl TimeSeries {
    pub fn new(sample_rate: f64, samples: Vec<f64>, start_time: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::invalid(
                "sample_rate",
                format!("must be > 0, got {sample_rate}"),
            ));
        }
        Ok(Self {
            sample_rate,
            samples,
            start_time,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start_time + i as f64 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len().max(1) as f64
    }

    /// Sample-by-sample `self - other` (e.g. the balanced difference channel).
    pub fn difference(&self, other: &TimeSeries) -> Result<TimeSeries> {
        if self.len() != other.len() || self.sample_rate != other.sample_rate {
            return Err(Error::invalid(
                "difference",
                "series must share length and sample rate",
            ));
        }
        Ok(TimeSeries {
            sample_rate: self.sample_rate,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a - b)
                .collect(),
            start_time: self.start_time,
        })
    }
}
