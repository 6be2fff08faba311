//! Field sweeps, calibration routines and analysis of recorded traces.

mod analysis;
mod calibration;
mod material;
mod sweep;
mod trace;

pub use analysis::{analyze_trace, AnalysisSettings, SnlReference, TraceReport};
pub use calibration::{
    auto_balance_conjugate, background_objective, calibrate_gain, minimize_background,
    BackgroundMinimum, BalanceRule, ConjugateBalance,
};
pub use material::{MaterialKind, MaterialResponse};
pub use sweep::{
    detection_setup, run_sweep, subtract_zero_field_offset, DemodSettings, DetectionSetup,
    Readout, SweepConfig, SweepPoint, SweepResult,
};
pub use trace::{simulate_trace, SimulatedTrace};
