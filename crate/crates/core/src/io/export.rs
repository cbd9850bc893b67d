//! Plain-text exports for sweeps, delay curves and fit results.
//! Numbers use Rust's shortest round-trip formatting.

use std::fmt::Write;

use crate::delay::DelayTrace;
use crate::fit::{residual, FitProblem, FitResult};
use crate::spectra::SweepMap;

/// Long format: one row per (axis value, detuning).
pub fn sweep_csv(map: &SweepMap) -> String {
    let mut out = String::from("axis_value,detuning_mhz,db\n");
    for (v, tr) in map.axis_values.iter().zip(&map.traces) {
        for (x, db) in tr.detuning.iter().zip(&tr.db) {
            let _ = writeln!(out, "{v},{x},{db}");
        }
    }
    out
}

pub fn delay_csv(trace: &DelayTrace) -> String {
    let mut out = String::from("detuning_mhz,unwrapped_phase_rad,delay_us,diverged\n");
    for i in 0..trace.detuning.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            trace.detuning[i], trace.unwrapped_phase[i], trace.delay[i], trace.diverged[i]
        );
    }
    out
}

pub fn delay_extremum_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("delta,extremal_delay_us\n");
    for (d, t) in curve {
        let _ = writeln!(out, "{d},{t}");
    }
    out
}

/// `key: value` report.
pub fn fit_report(result: &FitResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "converged: {}", result.converged);
    let _ = writeln!(out, "iterations: {}", result.iterations);
    let _ = writeln!(out, "residual_norm: {}", result.residual_norm);
    let _ = writeln!(out, "gradient_norm: {}", result.gradient_norm);
    for (k, &p) in result.free.iter().enumerate() {
        let _ = writeln!(out, "{}: {}", p.name(), result.estimate.get(p));
        match result.std_errors[k] {
            Some(se) => {
                let _ = writeln!(out, "{}_stderr: {se}", p.name());
            }
            None => {
                let _ = writeln!(out, "{}_stderr: unidentifiable", p.name());
            }
        }
    }
    for w in &result.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

/// Residuals at the estimate: complex traces give `re`/`im`, magnitude-only
/// traces leave `im` empty.
pub fn residual_csv(problem: &FitProblem, result: &FitResult) -> String {
    let r = residual(problem, &result.estimate);
    let mut out = String::from("trace,detuning_mhz,residual_re,residual_im\n");
    let mut k = 0;
    for (ti, obs) in problem.observations.iter().enumerate() {
        for &x in &obs.trace.detuning {
            if obs.trace.phase_known {
                let _ = writeln!(out, "{ti},{x},{},{}", r[k], r[k + 1]);
                k += 2;
            } else {
                let _ = writeln!(out, "{ti},{x},{},", r[k]);
                k += 1;
            }
        }
    }
    out
}
