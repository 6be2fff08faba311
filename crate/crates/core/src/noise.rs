//! Two-mode squeezed source statistics, loss propagation and Monte Carlo
//! photocurrent fluctuations.
//!
//! The seeded four-wave-mixing source is reduced to its gain `G`. For `n_in`
//! seed photons per sample interval, the phase-insensitive amplifier model
//! gives
//!
//! ```text
//! <p> = G n,  <c> = (G-1) n
//! Var p = G(2G-1) n,  Var c = (G-1)(2G-1) n,  Cov = 2G(G-1) n
//! ```
//!
//! and balanced loss `eta` on both arms yields the normalized
//! intensity-difference variance `1 - 2 eta (G-1) / (2G-1)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::{Error, Result};

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Below this mean photon number per sample the Gaussian approximation to
/// photocounting is rejected.
pub const MIN_PHOTONS_PER_SAMPLE: f64 = 100.0;

/// Samples per independently seeded Monte Carlo chunk.
pub const CHUNK_SAMPLES: usize = 1 << 16;

pub fn photon_energy(wavelength: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / wavelength
}

/// Mean photon number per sample interval `1 / sample_rate` at `power` watts.
pub fn photons_per_sample(power: f64, wavelength: f64, sample_rate: f64) -> f64 {
    power / (photon_energy(wavelength) * sample_rate)
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic child seed for a work unit identified by `path`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(master), |acc, &p| {
        mix64(acc ^ mix64(p.wrapping_add(0x9e37_79b9_7f4a_7c15)))
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezedSourceModel {
    /// Four-wave-mixing gain G >= 1.
    pub gain: f64,
    /// Probe power at the cell output, watts.
    pub probe_mean_power: f64,
    /// Meters.
    pub wavelength: f64,
}

impl SqueezedSourceModel {
    pub fn new(gain: f64, probe_mean_power: f64, wavelength: f64) -> Result<Self> {
        let s = Self {
            gain,
            probe_mean_power,
            wavelength,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain >= 1.0 && self.gain.is_finite()) {
            return Err(Error::invalid("gain", "gain must be ≥ 1"));
        }
        if !(self.probe_mean_power > 0.0) {
            return Err(Error::invalid("probe_mean_power", "must be > 0"));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::invalid("wavelength", "must be > 0"));
        }
        Ok(())
    }

    pub fn conjugate_mean_power(&self) -> f64 {
        self.probe_mean_power * (self.gain - 1.0) / self.gain
    }

    pub fn seed_power(&self) -> f64 {
        self.probe_mean_power / self.gain
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSegment {
    pub label: String,
    pub transmission: f64,
}

impl PathSegment {
    pub fn new(label: impl Into<String>, transmission: f64) -> Self {
        Self {
            label: label.into(),
            transmission,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBudget {
    pub probe_path_transmissions: Vec<PathSegment>,
    pub conjugate_path_transmissions: Vec<PathSegment>,
    pub detector_efficiency: f64,
}

impl LossBudget {
    pub fn new(
        probe: Vec<PathSegment>,
        conjugate: Vec<PathSegment>,
        detector_efficiency: f64,
    ) -> Result<Self> {
        let b = Self {
            probe_path_transmissions: probe,
            conjugate_path_transmissions: conjugate,
            detector_efficiency,
        };
        b.validate()?;
        Ok(b)
    }

    /// Both arms limited only by the detector.
    pub fn detector_only(detector_efficiency: f64) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), detector_efficiency)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |t: f64| t > 0.0 && t <= 1.0;
        if !ok(self.detector_efficiency) {
            return Err(Error::invalid(
                "detector_efficiency",
                format!("must lie in (0, 1], got {}", self.detector_efficiency),
            ));
        }
        for seg in self
            .probe_path_transmissions
            .iter()
            .chain(&self.conjugate_path_transmissions)
        {
            if !ok(seg.transmission) {
                return Err(Error::invalid(
                    "transmission",
                    format!("segment `{}` must lie in (0, 1], got {}", seg.label, seg.transmission),
                ));
            }
        }
        Ok(())
    }

    /// Product of the probe segments (detector excluded).
    pub fn probe_path_product(&self) -> f64 {
        self.probe_path_transmissions.iter().map(|s| s.transmission).product()
    }

    pub fn conjugate_path_product(&self) -> f64 {
        self.conjugate_path_transmissions
            .iter()
            .map(|s| s.transmission)
            .product()
    }

    pub fn probe_total(&self) -> f64 {
        self.probe_path_product() * self.detector_efficiency
    }

    pub fn conjugate_total(&self) -> f64 {
        self.conjugate_path_product() * self.detector_efficiency
    }

    pub fn with_probe_segment(mut self, label: &str, transmission: f64) -> Result<Self> {
        self.probe_path_transmissions
            .push(PathSegment::new(label, transmission));
        self.validate()?;
        Ok(self)
    }

    pub fn with_conjugate_segment(mut self, label: &str, transmission: f64) -> Result<Self> {
        self.conjugate_path_transmissions
            .push(PathSegment::new(label, transmission));
        self.validate()?;
        Ok(self)
    }
}

/// Photon-number moments per sample interval for the probe (p) and
/// conjugate (c) detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotocurrentStats {
    pub mean_p: f64,
    pub mean_c: f64,
    pub var_p: f64,
    pub var_c: f64,
    pub cov_pc: f64,
}

impl PhotocurrentStats {
    /// Independent Poissonian beams.
    pub fn coherent(mean_p: f64, mean_c: f64) -> Self {
        Self {
            mean_p,
            mean_c,
            var_p: mean_p,
            var_c: mean_c,
            cov_pc: 0.0,
        }
    }

    /// Checks non-negative variances and Cauchy-Schwarz.
    pub fn validate(&self) -> Result<()> {
        if self.var_p < 0.0 || self.var_c < 0.0 || !self.var_p.is_finite() || !self.var_c.is_finite() {
            return Err(Error::UnphysicalStatistics(format!(
                "negative variance (var_p = {}, var_c = {})",
                self.var_p, self.var_c
            )));
        }
        let bound = (self.var_p * self.var_c).sqrt();
        if self.cov_pc.abs() > bound * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::UnphysicalStatistics(format!(
                "|cov| = {} exceeds sqrt(var_p var_c) = {bound}",
                self.cov_pc.abs()
            )));
        }
        Ok(())
    }

    pub fn difference_variance(&self) -> f64 {
        self.var_p + self.var_c - 2.0 * self.cov_pc
    }

    /// Shot-noise level of the difference channel: total mean photon number.
    pub fn shot_noise_level(&self) -> f64 {
        self.mean_p + self.mean_c
    }

    /// Var(p - c) / (<p> + <c>): 1 at the shot-noise limit.
    pub fn normalized_difference_variance(&self) -> f64 {
        self.difference_variance() / self.shot_noise_level()
    }

    pub fn noise_floor_db(&self) -> f64 {
        10.0 * self.normalized_difference_variance().log10()
    }

    pub fn fano_p(&self) -> f64 {
        self.var_p / self.mean_p
    }

    pub fn fano_c(&self) -> f64 {
        self.var_c / self.mean_c
    }

    /// Adds uncorrelated white (electronic) variance to both detectors.
    pub fn with_added_white(&self, var_p: f64, var_c: f64) -> Self {
        Self {
            var_p: self.var_p + var_p,
            var_c: self.var_c + var_c,
            ..*self
        }
    }
}

pub fn lossless_stats(src: &SqueezedSourceModel, n_in: f64) -> Result<PhotocurrentStats> {
    src.validate()?;
    if !(n_in > 0.0 && n_in.is_finite()) {
        return Err(Error::invalid("n_in", format!("must be > 0, got {n_in}")));
    }
    let g = src.gain;
    Ok(PhotocurrentStats {
        mean_p: g * n_in,
        mean_c: (g - 1.0) * n_in,
        var_p: g * (2.0 * g - 1.0) * n_in,
        var_c: (g - 1.0) * (2.0 * g - 1.0) * n_in,
        cov_pc: 2.0 * g * (g - 1.0) * n_in,
    })
}

/// Beam-splitter loss on each arm.
pub fn apply_loss(stats: &PhotocurrentStats, eta_p: f64, eta_c: f64) -> Result<PhotocurrentStats> {
    for (name, eta) in [("eta_p", eta_p), ("eta_c", eta_c)] {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::invalid(name, format!("must lie in (0, 1], got {eta}")));
        }
    }
    let lossy = |mean: f64, var: f64, eta: f64| eta * eta * (var - mean) + eta * mean;
    Ok(PhotocurrentStats {
        mean_p: eta_p * stats.mean_p,
        mean_c: eta_c * stats.mean_c,
        var_p: lossy(stats.mean_p, stats.var_p, eta_p),
        var_c: lossy(stats.mean_c, stats.var_c, eta_c),
        cov_pc: eta_p * eta_c * stats.cov_pc,
    })
}

/// Normalized difference-noise floor 1 - 2 eta (G-1) / (2G-1), linear.
pub fn noise_floor_linear(gain: f64, eta: f64) -> Result<f64> {
    if !(gain >= 1.0 && gain.is_finite()) {
        return Err(Error::invalid("gain", "gain must be ≥ 1"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid("eta", "eta must lie in [0, 1]"));
    }
    Ok(1.0 - 2.0 * eta * (gain - 1.0) / (2.0 * gain - 1.0))
}

pub fn noise_floor_db(gain: f64, eta: f64) -> Result<f64> {
    Ok(10.0 * noise_floor_linear(gain, eta)?.log10())
}

/// Lower-triangular factor (l11, l21, l22) of the 2x2 covariance.
fn cholesky(stats: &PhotocurrentStats) -> Result<(f64, f64, f64)> {
    stats.validate()?;
    let l11 = stats.var_p.sqrt();
    if l11 == 0.0 {
        if stats.cov_pc != 0.0 {
            return Err(Error::UnphysicalStatistics(
                "nonzero covariance with zero probe variance".into(),
            ));
        }
        return Ok((0.0, 0.0, stats.var_c.sqrt()));
    }
    let l21 = stats.cov_pc / l11;
    let l22 = (stats.var_c - l21 * l21).max(0.0).sqrt();
    Ok((l11, l21, l22))
}

/// Zero-mean jointly Gaussian deviations (probe, conjugate) with the covariance
/// of `stats`.
///
/// The output is split into chunks of [`CHUNK_SAMPLES`], each with its own
/// generator seeded from `(seed, chunk index)`, so the result does not depend
/// on how rayon schedules the chunks.
pub fn sample_fluctuations(
    stats: &PhotocurrentStats,
    n_samples: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be ≥ 1"));
    }
    let (l11, l21, l22) = cholesky(stats)?;
    let mut probe = vec![0.0; n_samples];
    let mut conj = vec![0.0; n_samples];
    probe
        .par_chunks_mut(CHUNK_SAMPLES)
        .zip(conj.par_chunks_mut(CHUNK_SAMPLES))
        .enumerate()
        .for_each(|(chunk, (p, c))| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[chunk as u64]));
            for (pi, ci) in p.iter_mut().zip(c.iter_mut()) {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                *pi = l11 * z1;
                *ci = l21 * z1 + l22 * z2;
            }
        });
    Ok((probe, conj))
}

/// Monte Carlo estimate of Var(p - c) / (<p> + <c>).
pub fn estimate_normalized_difference_variance(
    stats: &PhotocurrentStats,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let (p, c) = sample_fluctuations(stats, n_samples, seed)?;
    let n = n_samples as f64;
    let mean = p.iter().zip(&c).map(|(a, b)| a - b).sum::<f64>() / n;
    let var = p
        .iter()
        .zip(&c)
        .map(|(a, b)| (a - b - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    Ok(var / stats.shot_noise_level())
}
