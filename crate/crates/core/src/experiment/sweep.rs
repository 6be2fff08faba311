use rayon::prelude::*;

use super::MaterialResponse;
use crate::noise::{
    apply_loss, derive_seed, lossless_stats, photons_per_sample, LossBudget, PhotocurrentStats,
    SqueezedSourceModel, MIN_PHOTONS_PER_SAMPLE,
};
use crate::optics::TrainConfig;
use crate::sigproc::synth::{add_noise, check_sampling, waveform};
use crate::sigproc::{dc_level, invert_first_harmonic, lock_in, DetectionNoise, TimeSeries};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Readout {
    /// Coherent probe and coherent reference at the detected powers of the
    /// squeezed probe and conjugate: the shot-noise limit.
    ClassicalBalanced,
    /// Two-mode squeezed probe and conjugate.
    Squeezed,
}

impl Readout {
    pub fn label(&self) -> &'static str {
        match self {
            Readout::ClassicalBalanced => "classical",
            Readout::Squeezed => "squeezed",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "classical" | "classical_balanced" => Some(Readout::ClassicalBalanced),
            "squeezed" => Some(Readout::Squeezed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemodSettings {
    pub sample_rate: f64,
    /// Lock-in integration time (and record length per repeat), seconds.
    pub integration_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Applied fields in tesla; must include 0.
    pub fields: Vec<f64>,
    pub repeats: usize,
    pub readout: Readout,
    pub source: SqueezedSourceModel,
    pub losses: LossBudget,
    /// Probe train. Its `input_power` is replaced by the source power
    /// delivered through the probe path; the sample response is set per field.
    pub train: TrainConfig,
    pub material: MaterialResponse,
    pub demod: DemodSettings,
    pub seed: u64,
    pub noiseless: bool,
    /// Additive white detector variance, photons^2 per sample, on each arm.
    pub electronic_noise_variance: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fields.is_empty() {
            return Err(Error::invalid("fields", "must be non-empty"));
        }
        if !self.fields.contains(&0.0) {
            return Err(Error::invalid("fields", "must include 0 for offset subtraction"));
        }
        if self.fields.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("fields", "must be finite"));
        }
        if self.repeats < 2 {
            return Err(Error::invalid("repeats", "repeats must be ≥ 2"));
        }
        if !(self.electronic_noise_variance >= 0.0) {
            return Err(Error::invalid("electronic_noise_variance", "must be ≥ 0"));
        }
        self.source.validate()?;
        self.losses.validate()?;
        self.train.validate()?;
        self.material.validate()?;
        check_sampling(
            &self.train,
            self.demod.sample_rate,
            self.demod.integration_time,
        )?;
        Ok(())
    }

    /// FNV-1a digest of the full configuration (16 hex digits).
    pub fn config_hash(&self) -> String {
        let text = format!("{self:?}");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Detected powers and photon statistics shared by all field points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSetup {
    /// Power entering the modulator scaled by the detector efficiency, so the
    /// train output is the detected probe power.
    pub probe_input_power: f64,
    pub eta_probe: f64,
    pub eta_conjugate: f64,
    pub stats: PhotocurrentStats,
    pub noise: DetectionNoise,
}

impl DetectionSetup {
    pub fn noise_floor_db(&self) -> f64 {
        self.stats.noise_floor_db()
    }
}

pub fn detection_setup(cfg: &SweepConfig) -> Result<DetectionSetup> {
    let fs = cfg.demod.sample_rate;
    let sample_power = cfg
        .train
        .sample
        .map(|s| s.mean_amp_transmission.powi(2))
        .unwrap_or(1.0);
    let eta_probe = cfg.losses.probe_total() * sample_power;
    let eta_conjugate = cfg.losses.conjugate_total();
    let n_in = photons_per_sample(cfg.source.seed_power(), cfg.source.wavelength, fs);
    let squeezed = apply_loss(&lossless_stats(&cfg.source, n_in)?, eta_probe, eta_conjugate)?;
    let stats = match cfg.readout {
        Readout::Squeezed => squeezed,
        Readout::ClassicalBalanced => PhotocurrentStats::coherent(squeezed.mean_p, squeezed.mean_c),
    }
    .with_added_white(cfg.electronic_noise_variance, cfg.electronic_noise_variance);
    if stats.mean_p < MIN_PHOTONS_PER_SAMPLE {
        return Err(Error::invalid(
            "probe_mean_power",
            format!(
                "{:.1} photons per sample is below the Gaussian-model threshold of {MIN_PHOTONS_PER_SAMPLE}",
                stats.mean_p
            ),
        ));
    }
    Ok(DetectionSetup {
        probe_input_power: cfg.source.probe_mean_power * cfg.losses.probe_total(),
        eta_probe,
        eta_conjugate,
        stats,
        noise: DetectionNoise::new(stats, cfg.source.wavelength, fs),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    /// Tesla.
    pub field: f64,
    /// Ellipticity with the zero-field mean subtracted.
    pub mean_eta_f: f64,
    /// Sample standard deviation over repeats.
    pub std_eta_f: f64,
    /// Mean signed first-harmonic amplitude of the difference channel, W.
    pub p_omega: f64,
    pub noise_floor_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub readout: Readout,
    pub points: Vec<SweepPoint>,
    pub seed: u64,
    pub config_hash: String,
    pub repeats: usize,
}

impl SweepResult {
    /// Error-bar convention recorded with every result.
    pub const ERROR_BAR: &'static str = "sample standard deviation over repeats";

    pub fn mean_std(&self) -> f64 {
        self.points.iter().map(|p| p.std_eta_f).sum::<f64>() / self.points.len() as f64
    }
}

/// Subtracts the B = 0 mean from every point. Idempotent, since the zero-field
/// entry becomes exactly 0.
pub fn subtract_zero_field_offset(points: &mut [SweepPoint]) {
    if let Some(zero) = points.iter().find(|p| p.field == 0.0).map(|p| p.mean_eta_f) {
        for p in points.iter_mut() {
            p.mean_eta_f -= zero;
        }
    }
}

struct Estimate {
    eta: f64,
    p_omega: f64,
}

fn estimate(
    wave: &[f64],
    noise: Option<&DetectionNoise>,
    cfg: &SweepConfig,
    field: f64,
    seed: u64,
) -> Result<Estimate> {
    let fs = cfg.demod.sample_rate;
    let f_ref = cfg.train.pem.frequency;
    let tau = cfg.demod.integration_time;
    let (probe, conj) = add_noise(wave, noise, seed)?;
    let probe = TimeSeries::new(fs, probe, 0.0)?;
    let diff = probe.difference(&TimeSeries::new(fs, conj, 0.0)?)?;
    let harmonic = lock_in(&diff, f_ref, 1, tau)?;
    let p_omega = harmonic.in_phase(cfg.train.pem.phase);
    let p_dc = dc_level(&probe, f_ref, tau)?;
    let eta = invert_first_harmonic(p_omega, p_dc).map_err(|e| Error::AtField {
        field_tesla: field,
        source: Box::new(e),
    })?;
    Ok(Estimate { eta, p_omega })
}

/// Runs the field sweep for one readout.
///
/// Every (field, repeat) unit draws its noise from a seed derived from the
/// master seed and the unit's indices. The readout is not part of the
/// derivation, so classical and squeezed sweeps with the same master seed
/// share their underlying normal deviates.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let setup = detection_setup(cfg)?;
    let fs = cfg.demod.sample_rate;
    let n = check_sampling(&cfg.train, fs, cfg.demod.integration_time)?;

    let waves: Vec<Vec<f64>> = cfg
        .fields
        .iter()
        .map(|&b| {
            let mut train = cfg
                .train
                .with_sample_response(cfg.material.theta_at(b), cfg.material.eta_at(b))
                .map_err(|e| Error::AtField {
                    field_tesla: b,
                    source: Box::new(e),
                })?;
            train.input_power = setup.probe_input_power;
            Ok(waveform(&train, fs, n))
        })
        .collect::<Result<_>>()?;

    let (repeats, noise) = if cfg.noiseless {
        (1, None)
    } else {
        (cfg.repeats, Some(&setup.noise))
    };
    let units: Vec<(usize, usize)> = (0..cfg.fields.len())
        .flat_map(|i| (0..repeats).map(move |r| (i, r)))
        .collect();
    let estimates: Vec<Estimate> = units
        .par_iter()
        .map(|&(i, r)| {
            let seed = derive_seed(cfg.seed, &[i as u64, r as u64]);
            estimate(&waves[i], noise, cfg, cfg.fields[i], seed)
        })
        .collect::<Result<_>>()?;

    let mut points: Vec<SweepPoint> = cfg
        .fields
        .iter()
        .enumerate()
        .map(|(i, &field)| {
            let group = &estimates[i * repeats..(i + 1) * repeats];
            let k = group.len() as f64;
            let mean = group.iter().map(|e| e.eta).sum::<f64>() / k;
            let std = if group.len() > 1 {
                (group.iter().map(|e| (e.eta - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
            } else {
                0.0
            };
            SweepPoint {
                field,
                mean_eta_f: mean,
                std_eta_f: std,
                p_omega: group.iter().map(|e| e.p_omega).sum::<f64>() / k,
                noise_floor_db: setup.noise_floor_db(),
            }
        })
        .collect();
    subtract_zero_field_offset(&mut points);

    Ok(SweepResult {
        readout: cfg.readout,
        points,
        seed: cfg.seed,
        config_hash: cfg.config_hash(),
        repeats: cfg.repeats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::SampleModel;

    fn config(readout: Readout, noiseless: bool) -> SweepConfig {
        let sample = SampleModel::simple(0.0, 0.0, 0.8f64.sqrt()).unwrap();
        SweepConfig {
            fields: vec![0.0, 0.2, 0.4, 0.6],
            repeats: 6,
            readout,
            source: SqueezedSourceModel::new(2.284, 100e-6, 795e-9).unwrap(),
            losses: LossBudget::detector_only(0.95)
                .unwrap()
                .with_conjugate_segment("nd", 0.8)
                .unwrap(),
            train: TrainConfig::ideal(100e-6, 50e3, Some(sample)).unwrap(),
            material: MaterialResponse::linear(0.02 / 0.6),
            demod: DemodSettings {
                sample_rate: 1e6,
                integration_time: 1e-3,
            },
            seed: 42,
            noiseless,
            electronic_noise_variance: 0.0,
        }
    }

    #[test]
    fn noiseless_sweep_recovers_linear_law() {
        let cfg = config(Readout::Squeezed, true);
        let res = run_sweep(&cfg).unwrap();
        for p in &res.points {
            assert!((p.mean_eta_f - cfg.material.slope * p.field).abs() < 1e-9);
            assert_eq!(p.std_eta_f, 0.0);
        }
        assert_eq!(res.points[0].mean_eta_f, 0.0);
        assert!(res.points.windows(2).all(|w| w[1].mean_eta_f > w[0].mean_eta_f));
    }

    #[test]
    fn noisy_sweep_has_error_bars_and_zero_offset() {
        let res = run_sweep(&config(Readout::ClassicalBalanced, false)).unwrap();
        assert_eq!(res.points[0].mean_eta_f, 0.0);
        assert!(res.points.iter().all(|p| p.std_eta_f > 0.0));
        assert_eq!(res.points[0].noise_floor_db, 0.0);
        let sq = run_sweep(&config(Readout::Squeezed, false)).unwrap();
        assert!(sq.points[0].noise_floor_db < -3.0);
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = config(Readout::Squeezed, false);
        assert_eq!(run_sweep(&cfg).unwrap(), run_sweep(&cfg).unwrap());
        let mut other = cfg.clone();
        other.seed = 43;
        assert_ne!(run_sweep(&cfg).unwrap(), run_sweep(&other).unwrap());
    }

    #[test]
    fn offset_is_idempotent() {
        let mut pts: Vec<SweepPoint> = [(0.0, 0.3), (0.1, 0.5), (0.2, 0.9)]
            .iter()
            .map(|&(field, m)| SweepPoint {
                field,
                mean_eta_f: m,
                std_eta_f: 0.0,
                p_omega: 0.0,
                noise_floor_db: 0.0,
            })
            .collect();
        subtract_zero_field_offset(&mut pts);
        let once = pts.clone();
        subtract_zero_field_offset(&mut pts);
        assert_eq!(once, pts);
        assert_eq!(pts[0].mean_eta_f, 0.0);
    }

    #[test]
    fn validation() {
        let mut cfg = config(Readout::Squeezed, false);
        cfg.repeats = 1;
        assert!(run_sweep(&cfg).unwrap_err().to_string().contains("repeats must be ≥ 2"));
        let mut cfg = config(Readout::Squeezed, false);
        cfg.fields = vec![0.1, 0.2];
        assert!(run_sweep(&cfg).is_err());
        let mut cfg = config(Readout::Squeezed, false);
        cfg.source.probe_mean_power = 1e-15;
        assert!(run_sweep(&cfg).is_err());
    }

    #[test]
    fn out_of_range_signal_names_the_field() {
        let mut cfg = config(Readout::Squeezed, true);
        cfg.material = MaterialResponse::linear(40.0);
        cfg.fields = vec![0.0, 0.001, 0.3];
        match run_sweep(&cfg) {
            Err(Error::AtField { field_tesla, .. }) => assert_eq!(field_tesla, 0.3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
