use rayon::prelude::*;

use super::TimeSeries;
use crate::noise::{photon_energy, sample_fluctuations, PhotocurrentStats};
use crate::optics::{detector_power, TrainConfig};
use crate::{Error, Result};

/// Minimum ratio of sample rate to modulation frequency.
pub const MIN_OVERSAMPLING: f64 = 20.0;
/// Minimum record length in modulation periods.
pub const MIN_PERIODS: f64 = 10.0;

/// Photon statistics per sample and their conversion to watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionNoise {
    pub stats: PhotocurrentStats,
    /// Watts represented by one photon per sample interval (h nu * fs).
    pub watts_per_photon: f64,
}

impl DetectionNoise {
    pub fn new(stats: PhotocurrentStats, wavelength: f64, sample_rate: f64) -> Self {
        Self {
            stats,
            watts_per_photon: photon_energy(wavelength) * sample_rate,
        }
    }

    pub fn conjugate_mean_power(&self) -> f64 {
        self.stats.mean_c * self.watts_per_photon
    }

    /// Variance of the difference channel at the shot-noise limit, W^2.
    pub fn shot_noise_variance(&self) -> f64 {
        self.stats.shot_noise_level() * self.watts_per_photon.powi(2)
    }
}

pub(crate) fn check_sampling(train: &TrainConfig, fs: f64, duration: f64) -> Result<usize> {
    let required = MIN_OVERSAMPLING * train.pem.frequency;
    if fs < required {
        return Err(Error::SampleRateTooLow {
            sample_rate: fs,
            required,
        });
    }
    if duration * train.pem.frequency < MIN_PERIODS - 1e-9 {
        return Err(Error::invalid(
            "duration",
            format!("must cover ≥ {MIN_PERIODS} modulation periods, got {duration} s"),
        ));
    }
    Ok((duration * fs).round() as usize)
}

/// Noiseless detected probe power at `n` samples starting at t = 0.
pub(crate) fn waveform(train: &TrainConfig, fs: f64, n: usize) -> Vec<f64> {
    (0..n)
        .into_par_iter()
        .map(|i| detector_power(train, i as f64 / fs))
        .collect()
}

/// Adds sampled fluctuations to a probe waveform; returns (probe, conjugate).
pub(crate) fn add_noise(
    waveform: &[f64],
    noise: Option<&DetectionNoise>,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    match noise {
        None => Ok((waveform.to_vec(), vec![0.0; waveform.len()])),
        Some(noise) => {
            let (dp, dc) = sample_fluctuations(&noise.stats, waveform.len(), seed)?;
            let scale = noise.watts_per_photon;
            let c_mean = noise.conjugate_mean_power();
            let probe = waveform.iter().zip(&dp).map(|(w, d)| w + d * scale).collect();
            let conj = dc.iter().map(|d| c_mean + d * scale).collect();
            Ok((probe, conj))
        }
    }
}

/// Synthesizes the probe and conjugate detector series.
///
/// The probe is the noiseless train power plus probe fluctuations; the
/// conjugate is its mean power plus conjugate fluctuations. Fluctuations are
/// stationary at the statistics of `noise` (the modulation depth is small).
/// Without noise the conjugate series is identically zero.
pub fn synthesize(
    train: &TrainConfig,
    noise: Option<&DetectionNoise>,
    fs: f64,
    duration: f64,
    seed: u64,
) -> Result<(TimeSeries, TimeSeries)> {
    train.validate()?;
    let n = check_sampling(train, fs, duration)?;
    let (probe, conj) = add_noise(&waveform(train, fs, n), noise, seed)?;
    Ok((TimeSeries::new(fs, probe, 0.0)?, TimeSeries::new(fs, conj, 0.0)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::SampleModel;
    use crate::sigproc::{bessel_j, dc_level, lock_in};
    use std::f64::consts::FRAC_PI_2;

    fn train(eta: f64) -> TrainConfig {
        TrainConfig::ideal(100e-6, 50e3, Some(SampleModel::simple(0.0, eta, 0.9).unwrap())).unwrap()
    }

    #[test]
    fn flat_train_gives_constant_probe() {
        let (p, c) = synthesize(&train(0.0), None, 1e6, 2e-4, 0).unwrap();
        let first = p.samples[0];
        assert!(p.samples.iter().all(|x| (x - first).abs() < 1e-12 * first));
        assert!(c.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn noiseless_first_harmonic() {
        let t = train(0.01);
        let (p, _) = synthesize(&t, None, 1e6, 2e-3, 0).unwrap();
        let r = lock_in(&p, 50e3, 1, 2e-3).unwrap();
        let p_dc = dc_level(&p, 50e3, 2e-3).unwrap();
        let expect = 2.0 * p_dc * bessel_j(1, FRAC_PI_2) * (0.02f64).tanh();
        assert!((r.amplitude - expect).abs() / expect < 1e-6);
        assert!((p_dc - t.ideal_mean_power()).abs() < 1e-12 * p_dc);
    }

    #[test]
    fn coherent_difference_channel_at_shot_level() {
        let t = train(0.0);
        let fs = 1e6;
        let mean = crate::noise::photons_per_sample(t.ideal_mean_power(), 795e-9, fs);
        let noise = DetectionNoise::new(PhotocurrentStats::coherent(mean, mean), 795e-9, fs);
        let (p, c) = synthesize(&t, Some(&noise), fs, 1.0, 21).unwrap();
        let d = p.difference(&c).unwrap();
        let m = d.mean();
        let var = d.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        assert!((var / noise.shot_noise_variance() - 1.0).abs() < 0.03);
    }

    #[test]
    fn sampling_preconditions() {
        assert!(matches!(
            synthesize(&train(0.0), None, 5e5, 1e-3, 0),
            Err(Error::SampleRateTooLow { .. })
        ));
        assert!(synthesize(&train(0.0), None, 1e6, 1e-4, 0).is_err());
    }

    #[test]
    fn seeded_synthesis_is_reproducible() {
        let noise = DetectionNoise::new(PhotocurrentStats::coherent(1e4, 1e4), 795e-9, 1e6);
        let a = synthesize(&train(0.01), Some(&noise), 1e6, 1e-3, 5).unwrap();
        let b = synthesize(&train(0.01), Some(&noise), 1e6, 1e-3, 5).unwrap();
        assert_eq!(a, b);
    }
}
