//! Optical element catalog and time-domain detector power of the probe train.
//!
//! The train is, in propagation order: linearly polarized input, photoelastic
//! modulator, sample, static background birefringence, second half-wave plate,
//! optional detector-window birefringence, photodiode. The photodiode weights
//! the horizontal and vertical intensities by `1 + eps` and `1 - eps`.
//!
//! With the conventions of [`crate::polarization`] the ideal train (45 degree
//! input, PEM axis at 0, sample only) yields
//! `P(t) = P_dc * (1 + sin(delta0 sin(wt)) * tanh(2 eta))`, which is
//! [`closed_form_power`] evaluated at `-eta`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};


use crate::polarization::{compose, PolarizationOperator, PolarizationState, C64};
use crate::{Error, Result};

/// Largest background retardance accepted by [`BackgroundModel`].
pub const MAX_BACKGROUND_RETARDANCE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PemConfig {
    /// Fast-axis orientation from horizontal, radians.
    pub axis_angle: f64,
    /// Peak retardance delta0, radians.
    pub peak_retardance: f64,
    /// Modulation frequency in Hz.
    pub frequency: f64,
    /// Modulation phase offset, radians.
    pub phase: f64,
}

impl PemConfig {
    pub fn new(axis_angle: f64, peak_retardance: f64, frequency: f64, phase: f64) -> Result<Self> {
        let pem = Self {
            axis_angle,
            peak_retardance,
            frequency,
            phase,
        };
        pem.validate()?;
        Ok(pem)
    }

    /// Quarter-wave peak retardance at 0 degrees.
    pub fn quarter_wave(frequency: f64) -> Result<Self> {
        Self::new(0.0, FRAC_PI_2, frequency, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_retardance > 0.0 && self.peak_retardance <= PI) {
            return Err(Error::invalid(
                "peak_retardance",
                format!("must lie in (0, pi], got {}", self.peak_retardance),
            ));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::invalid(
                "frequency",
                format!("must be > 0, got {}", self.frequency),
            ));
        }
        if !self.axis_angle.is_finite() || !self.phase.is_finite() {
            return Err(Error::invalid("pem", "angles must be finite"));
        }
        Ok(())
    }

    pub fn angular_frequency(&self) -> f64 {
        TAU * self.frequency
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    /// Instantaneous retardance delta0 * sin(wt + phase).
    pub fn retardance_at(&self, t: f64) -> f64 {
        self.peak_retardance * (self.angular_frequency() * t + self.phase).sin()
    }
}

/// Circular dichroic retarder: the magneto-optical sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleModel {
    /// Faraday rotation, radians.
    pub theta_f: f64,
    /// Faraday ellipticity (dimensionless).
    pub eta_f: f64,
    /// Geometric-mean amplitude transmission sqrt(t_R * t_L).
    pub mean_amp_transmission: f64,
    /// Thickness in meters (metadata).
    pub thickness: f64,
    /// Wavelength in meters (metadata).
    pub wavelength: f64,
}

impl SampleModel {
    pub fn new(
        theta_f: f64,
        eta_f: f64,
        mean_amp_transmission: f64,
        thickness: f64,
        wavelength: f64,
    ) -> Result<Self> {
        let s = Self {
            theta_f,
            eta_f,
            mean_amp_transmission,
            thickness,
            wavelength,
        };
        s.validate()?;
        Ok(s)
    }

    /// Sample without metadata, for quick construction in analysis code.
    pub fn simple(theta_f: f64, eta_f: f64, mean_amp_transmission: f64) -> Result<Self> {
        Self::new(theta_f, eta_f, mean_amp_transmission, 0.0, 0.0)
    }

    /// Builds the sample from its circular refractive indices and extinction
    /// coefficients: theta = pi d (n_r - n_l) / lambda,
    /// eta = pi d (k_r - k_l) / lambda.
    #[allow(clippy::too_many_arguments)]
    pub fn from_indices(
        thickness: f64,
        wavelength: f64,
        n_r: f64,
        n_l: f64,
        k_r: f64,
        k_l: f64,
        mean_amp_transmission: f64,
    ) -> Result<Self> {
        if !(wavelength > 0.0) || !(thickness >= 0.0) {
            return Err(Error::invalid(
                "sample",
                "thickness must be >= 0 and wavelength > 0",
            ));
        }
        let scale = PI * thickness / wavelength;
        Self::new(
            scale * (n_r - n_l),
            scale * (k_r - k_l),
            mean_amp_transmission,
            thickness,
            wavelength,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_amp_transmission > 0.0 && self.mean_amp_transmission <= 1.0) {
            return Err(Error::invalid(
                "mean_amp_transmission",
                format!("must lie in (0, 1], got {}", self.mean_amp_transmission),
            ));
        }
        if !self.theta_f.is_finite() || !self.eta_f.is_finite() {
            return Err(Error::invalid("sample", "theta_f and eta_f must be finite"));
        }
        if self.t_left() > 1.0 + 1e-15 || self.t_right() > 1.0 + 1e-15 {
            return Err(Error::invalid(
                "sample",
                format!(
                    "circular transmissions t_L = {}, t_R = {} exceed 1",
                    self.t_left(),
                    self.t_right()
                ),
            ));
        }
        Ok(())
    }

    pub fn with_response(&self, theta_f: f64, eta_f: f64) -> Result<Self> {
        Self::new(
            theta_f,
            eta_f,
            self.mean_amp_transmission,
            self.thickness,
            self.wavelength,
        )
    }

    pub fn t_left(&self) -> f64 {
        self.mean_amp_transmission * self.eta_f.exp()
    }

    pub fn t_right(&self) -> f64 {
        self.mean_amp_transmission * (-self.eta_f).exp()
    }

    /// Accumulated phases (phi_R, phi_L) with (phi_R - phi_L) / 2 = theta_F.
    pub fn circular_phases(&self) -> (f64, f64) {
        (self.theta_f, -self.theta_f)
    }

    /// Power transmission for linearly polarized light, t^2 cosh(2 eta).
    pub fn linear_power_transmission(&self) -> f64 {
        self.mean_amp_transmission.powi(2) * (2.0 * self.eta_f).cosh()
    }

    /// Jones matrix. Diagonal in the circular basis with phase-delay factors
    /// `t * exp(-i phi)`; a positive theta_F rotates x towards y.
    pub fn operator(&self) -> PolarizationOperator {
        let (phi_r, phi_l) = self.circular_phases();
        PolarizationOperator::from_circular_diagonal(
            C64::from_polar(self.t_right(), -phi_r),
            C64::from_polar(self.t_left(), -phi_l),
        )
    }
}

/// Residual birefringence of the optics and polarization dependence of the
/// photodiode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundModel {
    /// Lumped linear retardance of the optics ahead of the second HWP, radians.
    pub retardance: f64,
    /// Fast axis of that retardance, radians.
    pub axis_angle: f64,
    /// Relative responsivity asymmetry between horizontal and vertical.
    pub detector_pol_sensitivity: f64,
}

impl BackgroundModel {
    pub fn new(retardance: f64, axis_angle: f64, detector_pol_sensitivity: f64) -> Result<Self> {
        let b = Self {
            retardance,
            axis_angle,
            detector_pol_sensitivity,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.retardance.abs() < MAX_BACKGROUND_RETARDANCE) {
            return Err(Error::invalid(
                "background.retardance",
                format!("magnitude must be < {MAX_BACKGROUND_RETARDANCE} rad"),
            ));
        }
        if !(0.0..1.0).contains(&self.detector_pol_sensitivity) {
            return Err(Error::invalid(
                "background.detector_pol_sensitivity",
                format!("must lie in [0, 1), got {}", self.detector_pol_sensitivity),
            ));
        }
        if !self.axis_angle.is_finite() {
            return Err(Error::invalid("background.axis_angle", "must be finite"));
        }
        Ok(())
    }

    pub fn is_null(&self) -> bool {
        self.retardance == 0.0 && self.detector_pol_sensitivity == 0.0
    }
}

/// Catalog of the elements in the probe path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpticalElement {
    LinearPolarizer { angle: f64 },
    Retarder { axis_angle: f64, retardance: f64 },
    HalfWavePlate { axis_angle: f64 },
    QuarterWavePlate { axis_angle: f64 },
    Pem(PemConfig),
    Sample(SampleModel),
    /// Power transmission in (0, 1].
    NeutralDensity { transmission: f64 },
    /// Static birefringence part of the background.
    Background(BackgroundModel),
}

impl OpticalElement {
    pub fn validate(&self) -> Result<()> {
        match self {
            OpticalElement::Pem(p) => p.validate(),
            OpticalElement::Sample(s) => s.validate(),
            OpticalElement::Background(b) => b.validate(),
            OpticalElement::NeutralDensity { transmission } => {
                if *transmission > 0.0 && *transmission <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(
                        "transmission",
                        format!("must lie in (0, 1], got {transmission}"),
                    ))
                }
            }
            _ => Ok(()),
        }
    }

    pub fn operator(&self, t: f64) -> PolarizationOperator {
        match *self {
            OpticalElement::LinearPolarizer { angle } => {
                PolarizationOperator::diagonal(C64::new(1.0, 0.0), C64::new(0.0, 0.0))
                    .rotated(angle)
            }
            OpticalElement::Retarder {
                axis_angle,
                retardance,
            } => retarder(axis_angle, retardance),
            OpticalElement::HalfWavePlate { axis_angle } => retarder(axis_angle, PI),
            OpticalElement::QuarterWavePlate { axis_angle } => retarder(axis_angle, FRAC_PI_2),
            OpticalElement::Pem(pem) => retarder(pem.axis_angle, pem.retardance_at(t)),
            OpticalElement::Sample(sample) => sample.operator(),
            OpticalElement::NeutralDensity { transmission } => {
                PolarizationOperator::scalar(C64::new(transmission.sqrt(), 0.0))
            }
            OpticalElement::Background(bg) => retarder(bg.axis_angle, bg.retardance),
        }
    }
}

/// Linear retarder with its fast axis at `axis_angle`: the fast component
/// leads by `retardance`.
pub fn retarder(axis_angle: f64, retardance: f64) -> PolarizationOperator {
    PolarizationOperator::diagonal(
        C64::from_polar(1.0, retardance / 2.0),
        C64::from_polar(1.0, -retardance / 2.0),
    )
    .rotated(axis_angle)
}

pub fn element_operator(element: &OpticalElement, t: f64) -> PolarizationOperator {
    element.operator(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Input linear polarization angle, radians.
    pub input_polarizer_angle: f64,
    pub pem: PemConfig,
    pub sample: Option<SampleModel>,
    pub background: Option<BackgroundModel>,
    /// Second half-wave plate fast axis, radians.
    pub second_hwp_angle: f64,
    /// Power of the polarized probe entering the modulator, watts.
    pub input_power: f64,
}

impl TrainConfig {
    /// 45 degree input, quarter-wave PEM at 0 degrees, HWP at 0, optional sample.
    pub fn ideal(input_power: f64, pem_frequency: f64, sample: Option<SampleModel>) -> Result<Self> {
        let train = Self {
            input_polarizer_angle: FRAC_PI_4,
            pem: PemConfig::quarter_wave(pem_frequency)?,
            sample,
            background: None,
            second_hwp_angle: 0.0,
            input_power,
        };
        train.validate()?;
        Ok(train)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.input_power > 0.0 && self.input_power.is_finite()) {
            return Err(Error::invalid(
                "input_power",
                format!("must be > 0, got {}", self.input_power),
            ));
        }
        self.pem.validate()?;
        if let Some(s) = &self.sample {
            s.validate()?;
        }
        if let Some(b) = &self.background {
            b.validate()?;
        }
        Ok(())
    }

    pub fn input_state(&self) -> PolarizationState {
        PolarizationState::linear(self.input_polarizer_angle).scaled(self.input_power.sqrt())
    }

    /// Elements in propagation order (input polarization excluded; the probe
    /// enters already polarized).
    pub fn elements(&self) -> Vec<OpticalElement> {
        let mut out = vec![OpticalElement::Pem(self.pem)];
        if let Some(s) = self.sample {
            out.push(OpticalElement::Sample(s));
        }
        if let Some(b) = self.background {
            out.push(OpticalElement::Background(b));
        }
        out.push(OpticalElement::HalfWavePlate {
            axis_angle: self.second_hwp_angle,
        });
        out
    }

    pub fn operator_at(&self, t: f64) -> PolarizationOperator {
        let ops: Vec<_> = self.elements().iter().map(|e| e.operator(t)).collect();
        compose(&ops).expect("train always contains the modulator")
    }

    pub fn state_at_detector(&self, t: f64) -> PolarizationState {
        self.operator_at(t).apply(&self.input_state())
    }

    pub fn detector_sensitivity(&self) -> f64 {
        self.background
            .map(|b| b.detector_pol_sensitivity)
            .unwrap_or(0.0)
    }

    pub fn with_sample_response(&self, theta_f: f64, eta_f: f64) -> Result<Self> {
        let sample = match &self.sample {
            Some(s) => s.with_response(theta_f, eta_f)?,
            None => SampleModel::simple(theta_f, eta_f, 1.0)?,
        };
        Ok(Self {
            sample: Some(sample),
            ..self.clone()
        })
    }

    /// Zero-field copy: sample (if any) with theta_F = eta_F = 0.
    pub fn at_zero_field(&self) -> Self {
        let mut out = self.clone();
        if let Some(s) = &mut out.sample {
            s.theta_f = 0.0;
            s.eta_f = 0.0;
        }
        out
    }

    /// Time-averaged detected power for the ideal geometry without background.
    pub fn ideal_mean_power(&self) -> f64 {
        self.input_power
            * self
                .sample
                .map(|s| s.linear_power_transmission())
                .unwrap_or(1.0)
    }
}

/// Received power at time `t`, including the photodiode polarization
/// weighting `(1 + eps)|ex|^2 + (1 - eps)|ey|^2`.
pub fn detector_power(train: &TrainConfig, t: f64) -> f64 {
    let s = train.state_at_detector(t);
    let eps = train.detector_sensitivity();
    (1.0 + eps) * s.ex.norm_sqr() + (1.0 - eps) * s.ey.norm_sqr()
}

/// The circular-dichroism closed form P0 (1 - sin(delta0 sin wt) tanh(2 eta)).
pub fn closed_form_power(p0: f64, eta_f: f64, delta0: f64, omega: f64, t: f64) -> f64 {
    p0 * (1.0 - (delta0 * (omega * t).sin()).sin() * (2.0 * eta_f).tanh())
}

/// Amplitude and phase of harmonic `n` of the noiseless detector power, from
/// an `m`-point rectangle rule over one modulation period (exact for
/// band-limited waveforms with harmonics below `m / 2`).
pub fn harmonic_of_train(train: &TrainConfig, n: u32, m: usize) -> (f64, f64) {
    let period = train.pem.period();
    let w = train.pem.angular_frequency() * n as f64;
    let (mut x, mut y) = (0.0, 0.0);
    for k in 0..m {
        let t = period * k as f64 / m as f64;
        let p = detector_power(train, t);
        x += p * (w * t).sin();
        y += p * (w * t).cos();
    }
    x *= 2.0 / m as f64;
    y *= 2.0 / m as f64;
    (x.hypot(y), y.atan2(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal(eta: f64, t_bar: f64, theta: f64) -> TrainConfig {
        TrainConfig::ideal(
            100e-6,
            50e3,
            Some(SampleModel::simple(theta, eta, t_bar).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn pem_is_identity_at_zero_crossing() {
        let pem = PemConfig::quarter_wave(50e3).unwrap();
        let op = element_operator(&OpticalElement::Pem(pem), 0.0);
        assert!(op.max_abs_diff(&PolarizationOperator::identity()) < 1e-15);
        let half = element_operator(&OpticalElement::Pem(pem), pem.period() / 2.0);
        assert!(half.max_abs_diff(&PolarizationOperator::identity()) < 1e-12);
    }

    #[test]
    fn neutral_sample_is_identity() {
        let s = SampleModel::simple(0.0, 0.0, 1.0).unwrap();
        assert!(s.operator().max_abs_diff(&PolarizationOperator::identity()) < 1e-15);
    }

    #[test]
    fn faraday_rotation_rotates_linear_polarization() {
        for phi in [0.1, -0.4, 1.0] {
            let s = SampleModel::simple(phi, 0.0, 1.0).unwrap();
            let out = s.operator().apply(&PolarizationState::horizontal());
            // oracle: rotate in the circular basis by hand
            let (er, el) = PolarizationState::horizontal().to_circular();
            let expect =
                PolarizationState::from_circular(er * C64::from_polar(1.0, -phi), el * C64::from_polar(1.0, phi));
            assert!(out.approx_eq_up_to_phase(&expect, 1e-12));
            assert!(out.approx_eq_up_to_phase(&PolarizationState::linear(phi), 1e-12));
        }
    }

    #[test]
    fn sample_invariants_hold_by_construction() {
        let s = SampleModel::simple(0.3, 0.05, 0.8).unwrap();
        assert!(((s.t_left().ln() - s.t_right().ln()) / 2.0 - 0.05).abs() < 1e-12);
        let (pr, pl) = s.circular_phases();
        assert!(((pr - pl) / 2.0 - 0.3).abs() < 1e-12);
        assert!(s.operator().max_singular_value() <= 1.0 + 1e-12);
        assert!(SampleModel::simple(0.0, 0.3, 0.9).is_err());
        assert!(SampleModel::simple(0.0, 0.0, 0.0).is_err());
        assert!(SampleModel::simple(0.0, 0.0, 1.01).is_err());
    }

    #[test]
    fn from_indices_uses_faraday_definitions() {
        let s = SampleModel::from_indices(500e-6, 795e-9, 1.0 + 1e-6, 1.0, 2e-7, 1e-7, 0.9).unwrap();
        let scale = PI * 500e-6 / 795e-9;
        assert!((s.theta_f - scale * 1e-6).abs() < 1e-12);
        assert!((s.eta_f - scale * 1e-7).abs() < 1e-12);
    }

    #[test]
    fn element_validation() {
        assert!(PemConfig::new(0.0, 0.0, 50e3, 0.0).is_err());
        assert!(PemConfig::new(0.0, 4.0, 50e3, 0.0).is_err());
        assert!(PemConfig::new(0.0, PI, 50e3, 0.0).is_ok());
        assert!(PemConfig::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(BackgroundModel::new(0.25, 0.0, 0.0).is_err());
        assert!(BackgroundModel::new(0.01, 0.0, 1.0).is_err());
        assert!(OpticalElement::NeutralDensity { transmission: 1.5 }.validate().is_err());
        assert!(TrainConfig::ideal(0.0, 50e3, None).is_err());
    }

    #[test]
    fn no_ellipticity_means_no_modulation() {
        let train = ideal(0.0, 0.9, 0.2);
        let p0 = detector_power(&train, 0.0);
        for k in 0..50 {
            let t = k as f64 * 1.3e-6;
            assert!((detector_power(&train, t) - p0).abs() < 1e-12 * p0);
        }
    }

    #[test]
    fn peak_to_peak_modulation() {
        let eta = 0.01;
        let t_bar = 0.9;
        let mut train = ideal(eta, t_bar, 0.0);
        train.input_power = 100e-6 / (t_bar * t_bar * (2.0 * eta).cosh());
        let period = train.pem.period();
        let hi = detector_power(&train, period / 4.0);
        let lo = detector_power(&train, 3.0 * period / 4.0);
        let expect = 2.0 * 100e-6 * (2.0 * eta).tanh();
        assert!(((hi - lo) - expect).abs() < 1e-9 * 100e-6);
        assert!((hi - lo - 4.0e-6).abs() < 0.01e-6);
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(closed_form_power(2.0, 0.0, FRAC_PI_2, 1.0, 0.37), 2.0);
        let omega = TAU * 50e3;
        let t = 0.25 / 50e3;
        let p = closed_form_power(1.0, 0.25, FRAC_PI_2, omega, t);
        assert!((p - 0.537882842739990).abs() < 1e-12);
        assert!(closed_form_power(1.0, 50.0, FRAC_PI_2, omega, t).abs() < 1e-15);
    }

    #[test]
    fn pipeline_matches_closed_form_with_sign_flip() {
        for eta in [1e-4, 1e-2, 0.1] {
            let train = ideal(eta, 0.85, 0.05);
            let p_dc = train.ideal_mean_power();
            let w = train.pem.angular_frequency();
            for k in 0..400 {
                let t = train.pem.period() * k as f64 / 400.0;
                let a = detector_power(&train, t);
                let b = closed_form_power(p_dc, -eta, FRAC_PI_2, w, t);
                assert!((a - b).abs() / p_dc < 1e-9);
            }
        }
    }

    #[test]
    fn rotation_does_not_change_power() {
        let a = ideal(0.02, 0.9, 0.0);
        let b = ideal(0.02, 0.9, 0.7);
        for k in 0..64 {
            let t = a.pem.period() * k as f64 / 64.0;
            assert!((detector_power(&a, t) - detector_power(&b, t)).abs() < 1e-12 * a.input_power);
        }
    }

    #[test]
    fn ideal_waveform_has_no_even_harmonics() {
        let train = ideal(0.05, 0.9, 0.0);
        let p = train.ideal_mean_power();
        for n in [2, 4, 6] {
            assert!(harmonic_of_train(&train, n, 256).0 < 1e-9 * p);
        }
        assert!(harmonic_of_train(&train, 1, 256).0 > 1e-3 * p);
    }

    #[test]
    fn loss_lowers_mean_power() {
        let mut last = f64::INFINITY;
        for t_bar in [0.98, 0.95, 0.9, 0.5, 0.1] {
            let train = ideal(0.01, t_bar, 0.0);
            let m = 256;
            let mean: f64 = (0..m)
                .map(|k| detector_power(&train, train.pem.period() * k as f64 / m as f64))
                .sum::<f64>()
                / m as f64;
            assert!(mean < last);
            last = mean;
        }
    }

    #[test]
    fn background_produces_first_harmonic() {
        let mut train = TrainConfig::ideal(100e-6, 50e3, None).unwrap();
        train.background = Some(BackgroundModel::new(0.01, 0.3, 0.02).unwrap());
        let (amp, _) = harmonic_of_train(&train, 1, 256);
        assert!(amp > 0.0);
        // small-angle estimate 2 J1(pi/2) eps delta_bg |sin(2 axis)| P0
        let estimate = 2.0 * crate::sigproc::bessel_j(1, FRAC_PI_2) * 0.02 * 0.01 * 0.6f64.sin() * 100e-6;
        assert!((amp / estimate - 1.0).abs() < 0.01, "{amp:e} vs {estimate:e}");
    }
}
