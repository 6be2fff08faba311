use std::f64::consts::{FRAC_PI_2, TAU};

use super::{bessel_j, TimeSeries};
use crate::{Error, Result};

/// Output of a dual-phase lock-in at harmonic `harmonic_order`.
///
/// A pure input `A sin(2 pi n f t + phi)` yields `amplitude = A`, `phase = phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicResult {
    pub harmonic_order: u32,
    pub amplitude: f64,
    pub phase: f64,
    pub integration_time: f64,
}

impl HarmonicResult {
    /// Signed component along `sin(n w t + reference_phase)`.
    pub fn in_phase(&self, reference_phase: f64) -> f64 {
        self.amplitude * (self.phase - reference_phase).cos()
    }

    pub fn quadrature(&self, reference_phase: f64) -> f64 {
        self.amplitude * (self.phase - reference_phase).sin()
    }
}

/// Number of whole reference periods and samples in the boxcar window.
fn window(ts: &TimeSeries, f_ref: f64, tau: f64) -> Result<(usize, usize)> {
    if !(f_ref > 0.0) {
        return Err(Error::invalid("f_ref", "must be > 0"));
    }
    let periods = (tau * f_ref).round();
    if !(tau * f_ref >= 5.0 - 1e-9) || periods < 5.0 {
        return Err(Error::invalid(
            "tau",
            format!("integration time must cover ≥ 5 reference periods, got {tau} s"),
        ));
    }
    let samples = (periods * ts.sample_rate / f_ref).round() as usize;
    if samples > ts.len() {
        return Err(Error::WindowExceedsSeries {
            window: samples,
            available: ts.len(),
        });
    }
    Ok((periods as usize, samples))
}

/// Dual-phase demodulation at `n * f_ref`, boxcar-averaged over the whole
/// number of reference periods closest to `tau`, starting at the first sample.
pub fn lock_in(ts: &TimeSeries, f_ref: f64, n: u32, tau: f64) -> Result<HarmonicResult> {
    if n == 0 {
        return Err(Error::invalid("harmonic", "order must be ≥ 1; use dc_level"));
    }
    let (periods, len) = window(ts, f_ref, tau)?;
    let w = TAU * f_ref * n as f64;
    let (mut x, mut y) = (0.0, 0.0);
    for (i, &s) in ts.samples[..len].iter().enumerate() {
        let (sin, cos) = (w * ts.time(i)).sin_cos();
        x += s * sin;
        y += s * cos;
    }
    x *= 2.0 / len as f64;
    y *= 2.0 / len as f64;
    Ok(HarmonicResult {
        harmonic_order: n,
        amplitude: x.hypot(y),
        phase: y.atan2(x),
        integration_time: periods as f64 / f_ref,
    })
}

/// Mean over the same boxcar window as [`lock_in`].
pub fn dc_level(ts: &TimeSeries, f_ref: f64, tau: f64) -> Result<f64> {
    let (_, len) = window(ts, f_ref, tau)?;
    Ok(ts.samples[..len].iter().sum::<f64>() / len as f64)
}

/// Ellipticity from the signed first-harmonic amplitude:
/// `eta = artanh(p_omega / (2 p_dc J1(pi/2))) / 2`.
pub fn invert_first_harmonic(p_omega: f64, p_dc: f64) -> Result<f64> {
    if !(p_dc > 0.0) {
        return Err(Error::invalid("p_dc", format!("must be > 0, got {p_dc}")));
    }
    let ratio = p_omega / (2.0 * p_dc * bessel_j(1, FRAC_PI_2));
    if !(ratio.abs() < 1.0) {
        return Err(Error::SignalOutOfRange { ratio });
    }
    Ok(0.5 * ratio.atanh())
}
