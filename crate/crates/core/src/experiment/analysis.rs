use crate::sigproc::SpectrumPoint;
use crate::{Error, Result};

/// Shot-noise reference for a recorded trace.
#[derive(Debug, Clone, PartialEq)]
pub enum SnlReference {
    /// A reference trace, linearly interpolated (in dB) onto the trace grid.
    Trace(Vec<SpectrumPoint>),
    /// A flat level in the trace's dB units.
    Level(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisSettings {
    /// Frequency band (Hz) for the squeezing average; whole overlap if `None`.
    pub band: Option<(f64, f64)>,
    pub modulation_frequency: f64,
    /// The signal peak is searched within this distance of the modulation
    /// frequency. Points this close, and the falling skirt beyond them, are
    /// excluded from the noise average.
    pub peak_halfwidth: f64,
    /// Mean detected probe power, W; enables the ellipticity estimate.
    pub p_dc: Option<f64>,
    /// Absolute power of the 0 dB level, W^2 in the trace's units; needed
    /// with `p_dc` when the trace is referenced to the shot-noise level.
    pub snl_power: Option<f64>,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            band: None,
            modulation_frequency: 50e3,
            peak_halfwidth: 1e3,
            p_dc: None,
            snl_power: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceReport {
    /// Mean of (trace - reference) in dB over the analysis band, excluding
    /// the signal peak and its skirt.
    pub squeezing_db: f64,
    pub band: (f64, f64),
    pub points_used: usize,
    /// Frequency range (Hz) left out of the noise estimate around the peak.
    pub excluded: (f64, f64),
    pub peak_frequency: f64,
    pub peak_db: f64,
    /// Peak power above the median in-band noise, in units of the 0 dB level.
    pub signal_excess: f64,
    pub p_omega: Option<f64>,
    pub eta_f: Option<f64>,
}

fn check_trace(points: &[SpectrumPoint], what: &str) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::InvalidBand(format!("{what} needs ≥ 2 points")));
    }
    for (i, w) in points.windows(2).enumerate() {
        if !(w[1].frequency > w[0].frequency) {
            return Err(Error::Parse {
                row: i as u64 + 2,
                message: format!("{what} frequencies must be strictly increasing"),
            });
        }
    }
    Ok(())
}

fn interpolate(points: &[SpectrumPoint], f: f64) -> f64 {
    let i = points.partition_point(|p| p.frequency < f);
    if i == 0 {
        return points[0].power_db;
    }
    if i == points.len() {
        return points[i - 1].power_db;
    }
    let (a, b) = (points[i - 1], points[i]);
    let u = (f - a.frequency) / (b.frequency - a.frequency);
    a.power_db + u * (b.power_db - a.power_db)
}

/// Squeezing relative to the reference, signal peak and implied ellipticity
/// for a spectrum trace.
pub fn analyze_trace(
    trace: &[SpectrumPoint],
    reference: &SnlReference,
    settings: &AnalysisSettings,
) -> Result<TraceReport> {
    check_trace(trace, "trace")?;
    let (t_lo, t_hi) = (trace[0].frequency, trace[trace.len() - 1].frequency);
    let (mut lo, mut hi) = (t_lo, t_hi);
    if let SnlReference::Trace(r) = reference {
        check_trace(r, "reference")?;
        let (r_lo, r_hi) = (r[0].frequency, r[r.len() - 1].frequency);
        lo = lo.max(r_lo);
        hi = hi.min(r_hi);
        if lo > hi {
            return Err(Error::DisjointFrequencyRanges {
                trace_lo: t_lo,
                trace_hi: t_hi,
                ref_lo: r_lo,
                ref_hi: r_hi,
            });
        }
    }
    if let Some((b_lo, b_hi)) = settings.band {
        if !(b_lo < b_hi) {
            return Err(Error::InvalidBand(format!("band [{b_lo}, {b_hi}] is empty")));
        }
        lo = lo.max(b_lo);
        hi = hi.min(b_hi);
        if lo > hi {
            return Err(Error::InvalidBand(format!(
                "band [{b_lo}, {b_hi}] Hz outside the data range"
            )));
        }
    }
    let ref_db = |f: f64| match reference {
        SnlReference::Trace(r) => interpolate(r, f),
        SnlReference::Level(db) => *db,
    };

    let near_peak =
        |f: f64| (f - settings.modulation_frequency).abs() <= settings.peak_halfwidth;
    let peak_index = (0..trace.len())
        .filter(|&i| near_peak(trace[i].frequency))
        .max_by(|&a, &b| trace[a].power_db.total_cmp(&trace[b].power_db))
        .ok_or_else(|| {
            Error::InvalidBand(format!(
                "no trace points within {} Hz of {} Hz",
                settings.peak_halfwidth, settings.modulation_frequency
            ))
        })?;
    let peak = trace[peak_index];
    // The excluded region covers the peak half-width and then follows the
    // resolution-filter skirt outward for as long as the trace keeps falling.
    let (mut first, mut last) = (peak_index, peak_index);
    while first > 0
        && (near_peak(trace[first - 1].frequency)
            || trace[first - 1].power_db < trace[first].power_db)
    {
        first -= 1;
    }
    while last + 1 < trace.len()
        && (near_peak(trace[last + 1].frequency)
            || trace[last + 1].power_db < trace[last].power_db)
    {
        last += 1;
    }
    let excluded = (trace[first].frequency, trace[last].frequency);

    let in_band: Vec<&SpectrumPoint> = trace
        .iter()
        .filter(|p| p.frequency >= lo && p.frequency <= hi)
        .collect();
    let mut noise: Vec<&SpectrumPoint> = in_band
        .iter()
        .copied()
        .filter(|p| p.frequency < excluded.0 || p.frequency > excluded.1)
        .collect();
    if noise.is_empty() {
        noise = in_band.clone();
    }
    if noise.is_empty() {
        return Err(Error::InvalidBand(format!("no trace points in [{lo}, {hi}] Hz")));
    }
    let k = noise.len() as f64;
    let squeezing_db = noise
        .iter()
        .map(|p| p.power_db - ref_db(p.frequency))
        .sum::<f64>()
        / k;
    let mut linear: Vec<f64> = noise.iter().map(|p| 10f64.powf(p.power_db / 10.0)).collect();
    linear.sort_by(f64::total_cmp);
    let mid = linear.len() / 2;
    let noise_linear = if linear.len() % 2 == 1 {
        linear[mid]
    } else {
        0.5 * (linear[mid - 1] + linear[mid])
    };

    let signal_excess = (10f64.powf(peak.power_db / 10.0) - noise_linear).max(0.0);

    let (p_omega, eta_f) = match settings.p_dc {
        Some(p_dc) => {
            let unit = settings.snl_power.unwrap_or(1.0);
            if !(unit > 0.0) {
                return Err(Error::invalid("snl_power", "must be > 0"));
            }
            // a tone of amplitude A reads A^2 / 2
            let p_omega = (2.0 * signal_excess * unit).sqrt();
            let eta = crate::sigproc::invert_first_harmonic(p_omega, p_dc)?;
            (Some(p_omega), Some(eta.abs()))
        }
        None => (None, None),
    };

    Ok(TraceReport {
        squeezing_db,
        band: (lo, hi),
        points_used: noise.len(),
        excluded,
        peak_frequency: peak.frequency,
        peak_db: peak.power_db,
        signal_excess,
        p_omega,
        eta_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(level: f64, lo: f64, hi: f64, n: usize) -> Vec<SpectrumPoint> {
        (0..n)
            .map(|i| SpectrumPoint {
                frequency: lo + (hi - lo) * i as f64 / (n - 1) as f64,
                power_db: level,
            })
            .collect()
    }

    #[test]
    fn identical_trace_and_reference() {
        let t = flat(-70.0, 40e3, 60e3, 101);
        let r = analyze_trace(&t, &SnlReference::Trace(t.clone()), &AnalysisSettings::default())
            .unwrap();
        assert_eq!(r.squeezing_db, 0.0);
    }

    #[test]
    fn scalar_reference_and_band() {
        let mut t = flat(-3.0, 40e3, 60e3, 101);
        t[50].power_db = 20.0;
        let settings = AnalysisSettings {
            band: Some((45e3, 55e3)),
            ..Default::default()
        };
        let r = analyze_trace(&t, &SnlReference::Level(0.0), &settings).unwrap();
        assert!((r.squeezing_db + 3.0).abs() < 1e-12);
        assert_eq!(r.peak_frequency, 50e3);
        assert_eq!(r.band, (45e3, 55e3));
    }

    #[test]
    fn strong_tone_skirt_is_excluded() {
        // -3 dB floor with a small ripple and a Gaussian skirt 75 dB high
        let sigma = 850.0;
        let t: Vec<SpectrumPoint> = (0..91)
            .map(|i| {
                let f = 40e3 + 20e3 * i as f64 / 90.0;
                let tone = 10f64.powf(7.5) * (-(f - 50e3).powi(2) / (2.0 * sigma * sigma)).exp();
                let floor = 10f64.powf((-3.0 + 0.05 * (i as f64 * 1.7).sin()) / 10.0);
                SpectrumPoint {
                    frequency: f,
                    power_db: 10.0 * (floor + tone).log10(),
                }
            })
            .collect();
        let r = analyze_trace(&t, &SnlReference::Level(0.0), &AnalysisSettings::default()).unwrap();
        assert!((r.squeezing_db + 3.0).abs() < 0.05, "{}", r.squeezing_db);
        assert!(r.excluded.0 < 46e3 && r.excluded.1 > 54e3, "{:?}", r.excluded);
        assert!(r.points_used >= 20);
    }

    #[test]
    fn reference_is_interpolated() {
        let t = flat(0.0, 40e3, 60e3, 21);
        let r: Vec<SpectrumPoint> = (0..11)
            .map(|i| SpectrumPoint {
                frequency: 40e3 + 2e3 * i as f64,
                power_db: i as f64,
            })
            .collect();
        let settings = AnalysisSettings {
            peak_halfwidth: 0.0,
            modulation_frequency: 50e3,
            ..Default::default()
        };
        let rep = analyze_trace(&t, &SnlReference::Trace(r), &settings).unwrap();
        assert!((rep.squeezing_db + 5.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_ranges() {
        let t = flat(0.0, 40e3, 60e3, 11);
        let r = flat(0.0, 70e3, 80e3, 11);
        assert!(matches!(
            analyze_trace(&t, &SnlReference::Trace(r), &AnalysisSettings::default()),
            Err(Error::DisjointFrequencyRanges { .. })
        ));
    }

    #[test]
    fn ellipticity_from_peak() {
        let p_dc = 80e-6;
        let eta: f64 = 0.01;
        let a = 2.0 * p_dc * crate::sigproc::bessel_j(1, std::f64::consts::FRAC_PI_2) * (2.0 * eta).tanh();
        let unit = 1e-16;
        let mut t = flat(0.0, 40e3, 60e3, 101);
        t[50].power_db = 10.0 * (a * a / 2.0 / unit + 1.0).log10();
        let settings = AnalysisSettings {
            p_dc: Some(p_dc),
            snl_power: Some(unit),
            ..Default::default()
        };
        let r = analyze_trace(&t, &SnlReference::Level(0.0), &settings).unwrap();
        assert!((r.eta_f.unwrap() - eta).abs() < 1e-12);
    }
}
