use std::f64::consts::PI;

use crate::noise::{apply_loss, lossless_stats, noise_floor_db, LossBudget, SqueezedSourceModel};
use crate::optics::{harmonic_of_train, TrainConfig};
use crate::{Error, Result};

/// Gain that reaches `target_db` of intensity-difference squeezing when both
/// arms have transmission `eta`.
pub fn calibrate_gain(target_db: f64, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid("eta", format!("must be in (0, 1], got {eta}")));
    }
    if !target_db.is_finite() || target_db > 0.0 {
        return Err(Error::invalid(
            "target_db",
            format!("must be ≤ 0 dB, got {target_db}"),
        ));
    }
    if target_db == 0.0 {
        return Ok(1.0);
    }
    let v = 10f64.powf(target_db / 10.0);
    let margin = eta - 1.0 + v;
    if !(margin > 0.0) {
        return Err(Error::InsufficientTransmission {
            target_db,
            eta,
            linear: v,
        });
    }
    let gain = 1.0 + (1.0 - v) / (2.0 * margin);
    let check = noise_floor_db(gain, eta)?;
    if (check - target_db).abs() > 1e-9 {
        return Err(Error::invalid(
            "target_db",
            format!("inversion not consistent: {check} dB vs {target_db} dB"),
        ));
    }
    Ok(gain)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BalanceRule {
    /// Transmission that minimizes the normalized difference noise.
    #[default]
    MinimumNoise,
    /// Same total transmission on both arms.
    EqualTransmission,
    /// Same mean detected power on both arms.
    EqualPower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateBalance {
    pub rule: BalanceRule,
    /// Neutral-density transmission to insert in the conjugate arm.
    pub nd_transmission: f64,
    /// Total conjugate transmission with the ND in place.
    pub eta_conjugate: f64,
    pub eta_probe: f64,
    pub noise_floor_db: f64,
    /// The unconstrained optimum needed gain (> 1); the ND was left open.
    pub clamped: bool,
}

fn floor_db(gain: f64, eta_p: f64, eta_c: f64) -> Result<f64> {
    let src = SqueezedSourceModel::new(gain, 1.0, 795e-9)?;
    Ok(apply_loss(&lossless_stats(&src, 1.0)?, eta_p, eta_c)?.noise_floor_db())
}

/// Chooses the conjugate neutral-density transmission.
///
/// `probe_extra` is any probe loss not in the budget (the sample's power
/// transmission). The conjugate arm's fixed loss is the budget's conjugate
/// total.
pub fn auto_balance_conjugate(
    source: &SqueezedSourceModel,
    losses: &LossBudget,
    probe_extra: f64,
    rule: BalanceRule,
) -> Result<ConjugateBalance> {
    source.validate()?;
    losses.validate()?;
    if !(probe_extra > 0.0 && probe_extra <= 1.0) {
        return Err(Error::invalid(
            "probe_extra",
            format!("must be in (0, 1], got {probe_extra}"),
        ));
    }
    let g = source.gain;
    if g <= 1.0 {
        return Err(Error::BalanceUnachievable(
            "gain is 1, the conjugate carries no power".into(),
        ));
    }
    let eta_p = losses.probe_total() * probe_extra;
    let eta_c0 = losses.conjugate_total();
    let too_lossy = |nd: f64| {
        Error::BalanceUnachievable(format!(
            "probe arm lossier than achievable balance (ND transmission {nd:.6} > 1)"
        ))
    };
    let (nd, clamped) = match rule {
        BalanceRule::EqualTransmission => {
            let nd = eta_p / eta_c0;
            if nd > 1.0 {
                return Err(too_lossy(nd));
            }
            (nd, false)
        }
        BalanceRule::EqualPower => {
            let nd = eta_p * g / (eta_c0 * (g - 1.0));
            if nd > 1.0 {
                return Err(too_lossy(nd));
            }
            (nd, false)
        }
        BalanceRule::MinimumNoise => {
            // normalized variance is (a x^2 + b x + c) / (d x + e) in the
            // conjugate transmission x
            let a = 2.0 * (g - 1.0).powi(2);
            let b = (g - 1.0) * (1.0 - 4.0 * eta_p * g);
            let c = eta_p * g * (2.0 * eta_p * (g - 1.0) + 1.0);
            let d = g - 1.0;
            let e = eta_p * g;
            let x = (-a * e + (a * a * e * e - a * d * (b * e - c * d)).sqrt()) / (a * d);
            if !(x > 0.0) {
                return Err(Error::BalanceUnachievable(format!(
                    "no positive optimum (x = {x})"
                )));
            }
            let nd = x / eta_c0;
            if nd > 1.0 {
                (1.0, true)
            } else {
                (nd, false)
            }
        }
    };
    let eta_c = eta_c0 * nd;
    Ok(ConjugateBalance {
        rule,
        nd_transmission: nd,
        eta_conjugate: eta_c,
        eta_probe: eta_p,
        noise_floor_db: floor_db(g, eta_p, eta_c)?,
        clamped,
    })
}

/// Zero-field first-harmonic magnitude with the second HWP at `angle`.
pub fn background_objective(train: &TrainConfig, angle: f64) -> f64 {
    let mut t = train.at_zero_field();
    t.second_hwp_angle = angle;
    harmonic_of_train(&t, 1, OBJECTIVE_POINTS).0
}

const OBJECTIVE_POINTS: usize = 128;
const GRID_POINTS: usize = 64;
const ANGLE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundMinimum {
    /// Second HWP angle in [0, pi), radians.
    pub angle: f64,
    pub residual: f64,
    /// Objective at the train's configured angle.
    pub initial: f64,
    /// Best value on the coarse grid.
    pub grid_minimum: f64,
}

impl BackgroundMinimum {
    pub fn reduction(&self) -> f64 {
        self.initial / self.residual
    }
}

/// Minimizes the zero-field first harmonic over the second HWP angle: a
/// 64-point grid over [0, pi) followed by golden-section refinement in the
/// bracket around the best grid point.
pub fn minimize_background(train: &TrainConfig) -> Result<BackgroundMinimum> {
    train.validate()?;
    let initial = background_objective(train, train.second_hwp_angle);
    let step = PI / GRID_POINTS as f64;
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| background_objective(train, i as f64 * step))
        .collect();
    let (best, &grid_minimum) = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is non-empty");
    let scale = train.input_power;
    if grid.iter().all(|&v| v <= 1e-15 * scale) {
        return Ok(BackgroundMinimum {
            angle: 0.0,
            residual: background_objective(train, 0.0),
            initial,
            grid_minimum,
        });
    }

    let f = |x: f64| background_objective(train, x);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = ((best as f64 - 1.0) * step, (best as f64 + 1.0) * step);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > ANGLE_TOLERANCE {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let (mut angle, mut residual) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    if grid_minimum < residual {
        angle = best as f64 * step;
        residual = grid_minimum;
    }
    Ok(BackgroundMinimum {
        angle: angle.rem_euclid(PI),
        residual,
        initial,
        grid_minimum,
    })
}
