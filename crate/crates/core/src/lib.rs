//! Simulation and analysis of squeezed-light magnetic circular dichroism
//! (MCD) polarimetry.
//!
//! The crate models the measurement chain end to end: Jones-calculus
//! polarization optics with a photoelastic modulator, the two-mode squeezed
//! source and its loss budget, noisy photodetection, lock-in and
//! spectrum-analyzer demodulation, and the inversion of the first-harmonic
//! signal back to the Faraday ellipticity.
//!
//! Module map:
//!
//! - [`polarization`]: complex 2-vector / 2x2 algebra and circular basis.
//! - [`optics`]: element catalog and detector power of a configured train.
//! - [`noise`]: two-mode source statistics, loss, Monte Carlo fluctuations.
//! - [`sigproc`]: synthesis, lock-in, Bessel functions, SA emulation.
//! - [`experiment`]: field sweeps, calibration routines, trace analysis.
//! - [`config`] / [`io`]: experiment config files and CSV formats.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod error;
pub mod experiment;
pub mod io;
pub mod noise;
pub mod optics;
pub mod polarization;
pub mod sigproc;

pub use error::{Error, Result};

pub use experiment::{
    analyze_trace, auto_balance_conjugate, calibrate_gain, minimize_background, run_sweep,
    BalanceRule, MaterialResponse, Readout, SweepConfig, SweepResult,
};
pub use noise::{
    apply_loss, lossless_stats, noise_floor_db, sample_fluctuations, LossBudget,
    PhotocurrentStats, SqueezedSourceModel,
};
pub use optics::{
    closed_form_power, detector_power, element_operator, BackgroundModel, OpticalElement,
    PemConfig, SampleModel, TrainConfig,
};
pub use polarization::{compose, PolarizationOperator, PolarizationState};
pub use sigproc::{
    bessel_j, invert_first_harmonic, lock_in, spectrum, synthesize, HarmonicResult,
    SpectrumSettings, SpectrumTrace, TimeSeries,
};
