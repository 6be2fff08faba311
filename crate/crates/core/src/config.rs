//! Experiment configuration files (TOML).
//!
//! Every key has a default; an empty file describes the reference setup.
//! Angles are given in degrees, everything else in SI units. The annotated
//! template in `configs/experiment.toml` lists all keys.

use serde::Deserialize;

use crate::experiment::{
    auto_balance_conjugate, calibrate_gain, BalanceRule, DemodSettings, MaterialResponse, Readout,
    SweepConfig,
};
use crate::noise::{LossBudget, PathSegment, SqueezedSourceModel};
use crate::optics::{BackgroundModel, PemConfig, SampleModel, TrainConfig};
use crate::sigproc::SpectrumSettings;
use crate::{Error, Result};

pub const DEFAULT_SQUEEZING_DB: f64 = -5.0;

/// The annotated default configuration.
pub const TEMPLATE: &str = include_str!("../configs/experiment.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub pem: PemSection,
    pub probe: ProbeSection,
    pub sample: SampleSection,
    pub material: MaterialSection,
    pub source: SourceSection,
    pub losses: LossSection,
    pub background: Option<BackgroundSection>,
    pub sweep: SweepSection,
    pub demod: DemodSection,
    pub spectrum: SpectrumSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            pem: PemSection::default(),
            probe: ProbeSection::default(),
            sample: SampleSection::default(),
            material: MaterialSection::default(),
            source: SourceSection::default(),
            losses: LossSection::default(),
            background: None,
            sweep: SweepSection::default(),
            demod: DemodSection::default(),
            spectrum: SpectrumSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PemSection {
    pub frequency_hz: f64,
    pub peak_retardance_rad: f64,
    pub axis_deg: f64,
    pub phase_deg: f64,
}

impl Default for PemSection {
    fn default() -> Self {
        Self {
            frequency_hz: 50e3,
            peak_retardance_rad: std::f64::consts::FRAC_PI_2,
            axis_deg: 0.0,
            phase_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    /// Mean probe power leaving the source.
    pub power_w: f64,
    pub wavelength_m: f64,
    pub polarizer_deg: f64,
    pub second_hwp_deg: f64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            power_w: 100e-6,
            wavelength_m: 795e-9,
            polarizer_deg: 45.0,
            second_hwp_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    /// Mean power transmission t^2 at zero field.
    pub power_transmission: f64,
    pub thickness_m: f64,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            power_transmission: 0.80,
            thickness_m: 500e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialLaw {
    Linear,
    Saturating,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialSection {
    pub law: MaterialLaw,
    pub eta_slope_per_t: f64,
    pub saturation_field_t: f64,
    pub theta_slope_rad_per_t: f64,
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self {
            law: MaterialLaw::Linear,
            eta_slope_per_t: 0.02 / 0.6,
            saturation_field_t: 1.0,
            theta_slope_rad_per_t: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    /// Target intensity-difference squeezing with equal arm transmission
    /// `calibration_eta`; sets the gain. Defaults to -5 dB when no gain is
    /// given.
    pub squeezing_db: Option<f64>,
    /// Defaults to the detector efficiency.
    pub calibration_eta: Option<f64>,
    /// Explicit gain; excludes `squeezing_db`.
    pub gain: Option<f64>,
}


#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentEntry {
    pub label: String,
    pub transmission: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum NdSetting {
    Fixed(f64),
    Rule(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub detector_efficiency: f64,
    pub probe_path: Vec<SegmentEntry>,
    pub conjugate_path: Vec<SegmentEntry>,
    /// "balanced" (equal arm transmission), "optimal" (minimum noise),
    /// "equal_power", "none", or a fixed transmission.
    pub conjugate_nd: NdSetting,
    /// White detector variance per sample per arm, photons^2.
    pub electronic_noise_variance: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        Self {
            detector_efficiency: 0.95,
            probe_path: Vec::new(),
            conjugate_path: Vec::new(),
            conjugate_nd: NdSetting::Rule("balanced".into()),
            electronic_noise_variance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundSection {
    pub retardance_rad: f64,
    pub axis_deg: f64,
    pub detector_pol_sensitivity: f64,
    /// Replace the second HWP angle by the background-minimizing one.
    pub minimize: bool,
}

impl Default for BackgroundSection {
    fn default() -> Self {
        Self {
            retardance_rad: 0.0,
            axis_deg: 0.0,
            detector_pol_sensitivity: 0.0,
            minimize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub fields_mt: Vec<f64>,
    pub repeats: usize,
    pub readouts: Vec<String>,
    pub noiseless: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            fields_mt: (0..=6).map(|i| 100.0 * i as f64).collect(),
            repeats: 20,
            readouts: vec!["classical".into(), "squeezed".into()],
            noiseless: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemodSection {
    pub sample_rate_hz: f64,
    pub integration_time_s: f64,
}

impl Default for DemodSection {
    fn default() -> Self {
        Self {
            sample_rate_hz: 1e6,
            integration_time_s: 2e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub center_hz: f64,
    pub span_hz: f64,
    pub rbw_hz: f64,
    pub vbw_hz: f64,
    pub points: usize,
    pub duration_s: f64,
    /// Field for single-trace simulation.
    pub field_mt: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            center_hz: 50e3,
            span_hz: 20e3,
            rbw_hz: 3e3,
            vbw_hz: 300.0,
            points: 101,
            duration_s: (1u64 << 20) as f64 / 1e6,
            field_mt: 600.0,
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be > 0, got {v}")))
    }
}

fn fraction(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be in (0, 1], got {v}")))
    }
}

/// Re-keys a domain error under a config path.
fn at(key: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config { .. } => e,
        other => Error::config(key, other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| Error::config("<document>", e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        positive("pem.frequency_hz", self.pem.frequency_hz)?;
        positive("probe.power_w", self.probe.power_w)?;
        positive("probe.wavelength_m", self.probe.wavelength_m)?;
        fraction("sample.power_transmission", self.sample.power_transmission)?;
        positive("sample.thickness_m", self.sample.thickness_m)?;
        fraction("losses.detector_efficiency", self.losses.detector_efficiency)?;
        for (i, s) in self.losses.probe_path.iter().enumerate() {
            fraction(&format!("losses.probe_path[{i}].transmission"), s.transmission)?;
        }
        for (i, s) in self.losses.conjugate_path.iter().enumerate() {
            fraction(&format!("losses.conjugate_path[{i}].transmission"), s.transmission)?;
        }
        if !(self.losses.electronic_noise_variance >= 0.0) {
            return Err(Error::config("losses.electronic_noise_variance", "must be ≥ 0"));
        }
        self.balance_rule()?;
        if self.sweep.repeats < 2 {
            return Err(Error::config("sweep.repeats", "repeats must be ≥ 2"));
        }
        if self.sweep.fields_mt.is_empty() {
            return Err(Error::config("sweep.fields_mt", "must be non-empty"));
        }
        if !self.sweep.fields_mt.contains(&0.0) {
            return Err(Error::config(
                "sweep.fields_mt",
                "must include 0 for offset subtraction",
            ));
        }
        self.readouts()?;
        positive("demod.sample_rate_hz", self.demod.sample_rate_hz)?;
        positive("demod.integration_time_s", self.demod.integration_time_s)?;
        positive("spectrum.duration_s", self.spectrum.duration_s)?;
        self.material().validate().map_err(at("material"))?;
        self.gain()?;
        self.pem_config()?;
        self.background_model()?;
        Ok(())
    }

    pub fn readouts(&self) -> Result<Vec<Readout>> {
        if self.sweep.readouts.is_empty() {
            return Err(Error::config("sweep.readouts", "must be non-empty"));
        }
        self.sweep
            .readouts
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Readout::from_label(s).ok_or_else(|| {
                    Error::config(
                        format!("sweep.readouts[{i}]"),
                        format!("unknown readout `{s}` (classical | squeezed)"),
                    )
                })
            })
            .collect()
    }

    fn balance_rule(&self) -> Result<Option<BalanceRule>> {
        match &self.losses.conjugate_nd {
            NdSetting::Fixed(v) => {
                fraction("losses.conjugate_nd", *v)?;
                Ok(None)
            }
            NdSetting::Rule(s) => match s.as_str() {
                "balanced" => Ok(Some(BalanceRule::EqualTransmission)),
                "optimal" => Ok(Some(BalanceRule::MinimumNoise)),
                "equal_power" => Ok(Some(BalanceRule::EqualPower)),
                "none" => Ok(None),
                other => Err(Error::config(
                    "losses.conjugate_nd",
                    format!(
                        "unknown setting `{other}` (balanced | optimal | equal_power | none | number)"
                    ),
                )),
            },
        }
    }

    pub fn gain(&self) -> Result<f64> {
        match (self.source.gain, self.source.squeezing_db) {
            (Some(_), Some(_)) => Err(Error::config(
                "source",
                "set either `gain` or `squeezing_db`, not both",
            )),
            (Some(g), None) => {
                if g >= 1.0 && g.is_finite() {
                    Ok(g)
                } else {
                    Err(Error::config("source.gain", "gain must be ≥ 1"))
                }
            }
            (None, target) => {
                let db = target.unwrap_or(DEFAULT_SQUEEZING_DB);
                let eta = self
                    .source
                    .calibration_eta
                    .unwrap_or(self.losses.detector_efficiency);
                fraction("source.calibration_eta", eta)?;
                calibrate_gain(db, eta).map_err(at("source.squeezing_db"))
            }
        }
    }

    pub fn source_model(&self) -> Result<SqueezedSourceModel> {
        SqueezedSourceModel::new(self.gain()?, self.probe.power_w, self.probe.wavelength_m)
            .map_err(at("source"))
    }

    fn base_losses(&self) -> Result<LossBudget> {
        let seg = |v: &[SegmentEntry]| {
            v.iter()
                .map(|s| PathSegment::new(s.label.clone(), s.transmission))
                .collect()
        };
        LossBudget::new(
            seg(&self.losses.probe_path),
            seg(&self.losses.conjugate_path),
            self.losses.detector_efficiency,
        )
        .map_err(at("losses"))
    }

    /// Conjugate neutral-density transmission selected by `losses.conjugate_nd`.
    pub fn conjugate_nd(&self) -> Result<f64> {
        if let NdSetting::Fixed(v) = self.losses.conjugate_nd {
            return Ok(v);
        }
        match self.balance_rule()? {
            None => Ok(1.0),
            Some(rule) => Ok(auto_balance_conjugate(
                &self.source_model()?,
                &self.base_losses()?,
                self.sample.power_transmission,
                rule,
            )
            .map_err(at("losses.conjugate_nd"))?
            .nd_transmission),
        }
    }

    /// Loss budget including the conjugate neutral-density filter.
    pub fn loss_budget(&self) -> Result<LossBudget> {
        let nd = self.conjugate_nd()?;
        let base = self.base_losses()?;
        if nd < 1.0 {
            base.with_conjugate_segment("conjugate ND", nd)
                .map_err(at("losses.conjugate_nd"))
        } else {
            Ok(base)
        }
    }

    fn pem_config(&self) -> Result<PemConfig> {
        PemConfig::new(
            self.pem.axis_deg.to_radians(),
            self.pem.peak_retardance_rad,
            self.pem.frequency_hz,
            self.pem.phase_deg.to_radians(),
        )
        .map_err(at("pem"))
    }

    fn background_model(&self) -> Result<Option<BackgroundModel>> {
        self.background
            .as_ref()
            .map(|b| {
                BackgroundModel::new(
                    b.retardance_rad,
                    b.axis_deg.to_radians(),
                    b.detector_pol_sensitivity,
                )
                .map_err(at("background"))
            })
            .transpose()
    }

    pub fn material(&self) -> MaterialResponse {
        let m = &self.material;
        let mut out = match m.law {
            MaterialLaw::Linear => MaterialResponse::linear(m.eta_slope_per_t),
            MaterialLaw::Saturating => {
                MaterialResponse::saturating(m.eta_slope_per_t, m.saturation_field_t)
            }
        };
        out.theta_slope = m.theta_slope_rad_per_t;
        out
    }

    /// The probe train at zero field with the configured source power; the
    /// sweep rescales the input power to the detected level.
    pub fn train(&self) -> Result<TrainConfig> {
        let sample = SampleModel::new(
            0.0,
            0.0,
            self.sample.power_transmission.sqrt(),
            self.sample.thickness_m,
            self.probe.wavelength_m,
        )
        .map_err(at("sample"))?;
        let mut train = TrainConfig {
            input_polarizer_angle: self.probe.polarizer_deg.to_radians(),
            pem: self.pem_config()?,
            sample: Some(sample),
            background: self.background_model()?,
            second_hwp_angle: self.probe.second_hwp_deg.to_radians(),
            input_power: self.probe.power_w,
        };
        train.validate().map_err(at("probe"))?;
        if self.background.as_ref().is_some_and(|b| b.minimize) {
            train.second_hwp_angle = crate::experiment::minimize_background(&train)?.angle;
        }
        Ok(train)
    }

    pub fn sweep_config(&self, readout: Readout, seed: u64) -> Result<SweepConfig> {
        Ok(SweepConfig {
            fields: self.sweep.fields_mt.iter().map(|b| b * 1e-3).collect(),
            repeats: self.sweep.repeats,
            readout,
            source: self.source_model()?,
            losses: self.loss_budget()?,
            train: self.train()?,
            material: self.material(),
            demod: DemodSettings {
                sample_rate: self.demod.sample_rate_hz,
                integration_time: self.demod.integration_time_s,
            },
            seed,
            noiseless: self.sweep.noiseless,
            electronic_noise_variance: self.losses.electronic_noise_variance,
        })
    }

    pub fn spectrum_settings(&self) -> SpectrumSettings {
        let s = &self.spectrum;
        SpectrumSettings::new(s.center_hz, s.span_hz, s.rbw_hz, s.vbw_hz).with_points(s.points)
    }
}
