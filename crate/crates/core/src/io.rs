//! CSV reading and writing.
//!
//! All files are comma-separated with a mandatory header row and LF line
//! endings. Numbers are written with 9 significant digits.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use crate::experiment::SweepResult;
use crate::sigproc::{SpectrumPoint, TimeSeries};
use crate::{Error, Result};

pub const SWEEP_HEADER: &str = "field_mT,eta_f_mean,eta_f_std,p_omega_W,noise_floor_dB,readout";
pub const TRACE_HEADER: &str = "freq_Hz,power_dB_rel_SNL";
pub const TIMESERIES_HEADER: &str = "t_s,power_W";

/// Formats `x` with 9 significant digits in the shortest of fixed or
/// exponent notation, without trailing zeros.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let fixed = format!("{:.*}", (8 - exp).max(0) as usize, x);
        trim_fraction(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Sweep rows, one block per result in the given order.
pub fn sweep_csv(results: &[SweepResult]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in results {
        for p in &r.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                format_number(p.field * 1e3),
                format_number(p.mean_eta_f),
                format_number(p.std_eta_f),
                format_number(p.p_omega),
                format_number(p.noise_floor_db),
                r.readout.label()
            );
        }
    }
    out
}

pub fn trace_csv(points: &[SpectrumPoint]) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for p in points {
        let _ = writeln!(out, "{},{}", format_number(p.frequency), format_number(p.power_db));
    }
    out
}

pub fn timeseries_csv(ts: &TimeSeries) -> String {
    let mut out = format!("{TIMESERIES_HEADER}\n");
    for (i, s) in ts.samples.iter().enumerate() {
        let _ = writeln!(out, "{},{}", format_number(ts.time(i)), format_number(*s));
    }
    out
}

fn read_pairs(reader: impl Read, header: &str) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let expected: Vec<&str> = header.split(',').collect();
    let found = rdr.headers().map_err(|e| Error::Parse {
        row: 1,
        message: e.to_string(),
    })?;
    if found.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            row: 1,
            message: format!("expected header `{header}`, found `{}`", found.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            row: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let row = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 2 {
            return Err(Error::Parse {
                row,
                message: format!("expected 2 columns, found {}", rec.len()),
            });
        }
        let mut vals = [0.0; 2];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = rec[k].parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                Error::Parse {
                    row,
                    message: format!("column `{}`: `{}` is not a finite number", expected[k], &rec[k]),
                }
            })?;
        }
        out.push((vals[0], vals[1]));
    }
    Ok(out)
}

/// Reads a spectrum trace; frequencies must be strictly increasing.
/// Rows are reported by file line number (the header is line 1).
pub fn read_trace(reader: impl Read) -> Result<Vec<SpectrumPoint>> {
    let pairs = read_pairs(reader, TRACE_HEADER)?;
    if pairs.is_empty() {
        return Err(Error::Parse {
            row: 2,
            message: "trace has no data rows".into(),
        });
    }
    for (i, w) in pairs.windows(2).enumerate() {
        if !(w[1].0 > w[0].0) {
            return Err(Error::Parse {
                row: i as u64 + 3,
                message: "frequencies must be strictly increasing".into(),
            });
        }
    }
    Ok(pairs
        .into_iter()
        .map(|(frequency, power_db)| SpectrumPoint {
            frequency,
            power_db,
        })
        .collect())
}

/// Reads a uniformly sampled time series; the sample rate is taken from the
/// mean spacing, and every spacing must agree with it to 1e-6 relative.
pub fn read_timeseries(reader: impl Read) -> Result<TimeSeries> {
    let pairs = read_pairs(reader, TIMESERIES_HEADER)?;
    if pairs.len() < 2 {
        return Err(Error::Parse {
            row: pairs.len() as u64 + 2,
            message: "time series needs ≥ 2 rows".into(),
        });
    }
    let n = pairs.len();
    let dt = (pairs[n - 1].0 - pairs[0].0) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::Parse {
            row: 3,
            message: "times must be strictly increasing".into(),
        });
    }
    for (i, w) in pairs.windows(2).enumerate() {
        if ((w[1].0 - w[0].0) / dt - 1.0).abs() > 1e-6 {
            return Err(Error::Parse {
                row: i as u64 + 3,
                message: format!("non-uniform sampling: step {} s vs {dt} s", w[1].0 - w[0].0),
            });
        }
    }
    TimeSeries::new(1.0 / dt, pairs.iter().map(|p| p.1).collect(), pairs[0].0)
}

pub fn read_trace_file(path: &Path) -> Result<Vec<SpectrumPoint>> {
    read_trace(std::fs::File::open(path)?)
}

pub fn read_timeseries_file(path: &Path) -> Result<TimeSeries> {
    read_timeseries(std::fs::File::open(path)?)
}
