//! Time-domain integration of the damped, driven mode equations.
//!
//! Used as a brute-force cross-check of the closed-form steady state: it never
//! calls into the algebraic solution. Integration runs in angular units
//! (rad/µs, time in µs); amplitudes are rescaled by `√(2π)` on return so they
//! share the normalization of [`crate::model::steady_state`].

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{DriveField, ModeAmplitudes, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Fixed step, µs.
    pub step: f64,
    /// Integration horizon, µs.
    pub max_time: f64,
    /// Largest relative change over one settling window accepted as steady.
    pub settle_tol: f64,
}

impl IntegratorConfig {
    /// Step of `0.01 / (fastest rate)` and a horizon of 60 slowest decay times.
    pub fn for_system(params: &SystemParams, detuning: f64, settle_tol: f64) -> Self {
        let rates = Rates::new(params, detuning);
        IntegratorConfig {
            step: 0.01 / rates.fastest(),
            max_time: 60.0 / rates.slowest_decay(),
            settle_tol,
        }
    }

    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid("step", format!("must be positive, got {}", self.step)));
        }
        if !(self.settle_tol > 0.0 && self.settle_tol <= 1e-3) {
            return Err(Error::invalid(
                "settle_tol",
                format!("must lie in (0, 1e-3], got {}", self.settle_tol),
            ));
        }
        let slowest = TAU * params.kappa_c.min(params.kappa_m);
        if !(self.max_time >= 10.0 / slowest) {
            return Err(Error::invalid(
                "max_time",
                format!(
                    "must cover at least 10 decay times ({} us), got {}",
                    10.0 / slowest,
                    self.max_time
                ),
            ));
        }
        Ok(())
    }
}

/// Angular-frequency coefficients of the linear system `y' = A y + b`.
struct Rates {
    loss_c: Complex64,
    loss_m: Complex64,
    coupling: Complex64,
    kappa_min: f64,
    fastest: f64,
}

impl Rates {
    fn new(params: &SystemParams, detuning: f64) -> Self {
        let (dc, dm) = params.detunings(detuning);
        let kc = TAU * params.kappa_c;
        let km = TAU * params.kappa_m;
        let fastest = [kc, km, TAU * dc.abs(), TAU * dm.abs(), TAU * params.coupling_g]
            .into_iter()
            .fold(0.0, f64::max);
        Rates {
            loss_c: Complex64::new(kc, TAU * dc),
            loss_m: Complex64::new(km, TAU * dm),
            coupling: Complex64::new(0.0, TAU * params.coupling_g),
            kappa_min: kc.min(km),
            fastest,
        }
    }

    fn fastest(&self) -> f64 {
        self.fastest
    }

    fn slowest_decay(&self) -> f64 {
        self.kappa_min
    }
}

type State = [Complex64; 2];

fn derivative(r: &Rates, drive: &State, y: &State) -> State {
    [
        drive[0] - r.loss_c * y[0] - r.coupling * y[1],
        drive[1] - r.coupling * y[0] - r.loss_m * y[1],
    ]
}

fn axpy(y: &State, h: f64, k: &State) -> State {
    [y[0] + k[0] * h, y[1] + k[1] * h]
}

fn rk4_step(r: &Rates, drive: &State, y: &State, h: f64) -> State {
    let k1 = derivative(r, drive, y);
    let k2 = derivative(r, drive, &axpy(y, 0.5 * h, &k1));
    let k3 = derivative(r, drive, &axpy(y, 0.5 * h, &k2));
    let k4 = derivative(r, drive, &axpy(y, h, &k3));
    let w = h / 6.0;
    [
        y[0] + (k1[0] + (k2[0] + k3[0]) * 2.0 + k4[0]) * w,
        y[1] + (k1[1] + (k2[1] + k3[1]) * 2.0 + k4[1]) * w,
    ]
}

/// Integrates from empty modes until the state stops changing.
///
/// Every settling window (one slowest decay time, `1 / (2π min κ)`) the state
/// is compared with the previous window; integration stops once the largest
/// per-mode change, relative to the state norm, drops below `settle_tol`.
pub fn integrate_to_steady(
    params: &SystemParams,
    drive: &DriveField,
    detuning: f64,
    cfg: &IntegratorConfig,
) -> Result<ModeAmplitudes> {
    cfg.validate(params)?;
    let rates = Rates::new(params, detuning);

    let port_c = (TAU * 2.0 * params.kappa_c1).sqrt();
    let port_m = (TAU * 2.0 * params.kappa_m1).sqrt();
    let (s, c) = (drive.phase_phi + drive.phase_offset).sin_cos();
    let pump = Complex64::new(c, -s) * (port_m * drive.ratio_delta * drive.probe_amp);
    let forcing: State = [Complex64::new(port_c * drive.probe_amp, 0.0), pump];

    let window = 1.0 / rates.slowest_decay();
    let steps_per_window = (window / cfg.step).ceil().max(1.0) as usize;
    let h = window / steps_per_window as f64;

    let mut y: State = [Complex64::new(0.0, 0.0); 2];
    let mut prev = y;
    let mut elapsed = 0.0;
    let mut last_change = f64::INFINITY;
    while elapsed < cfg.max_time {
        for _ in 0..steps_per_window {
            y = rk4_step(&rates, &forcing, &y, h);
        }
        elapsed += window;
        let norm = y[0].norm().hypot(y[1].norm());
        if norm == 0.0 {
            return Ok(rescale(y));
        }
        let change = (y[0] - prev[0]).norm().max((y[1] - prev[1]).norm()) / norm;
        if change < cfg.settle_tol {
            return Ok(rescale(y));
        }
        last_change = change;
        prev = y;
    }
    Err(Error::Timeout {
        max_time: cfg.max_time,
        residual: last_change,
    })
}

fn rescale(y: State) -> ModeAmplitudes {
    let s = TAU.sqrt();
    ModeAmplitudes {
        cavity_amp: y[0] * s,
        magnon_amp: y[1] * s,
    }
}

/// Transmission assembled from the integrated cavity amplitude.
pub fn oracle_transmission(
    params: &SystemParams,
    drive: &DriveField,
    detuning: f64,
    cfg: &IntegratorConfig,
) -> Result<Complex64> {
    let amps = integrate_to_steady(params, drive, detuning, cfg)?;
    let port = (2.0 * params.kappa_c1).sqrt();
    Ok((Complex64::from(drive.probe_amp) - amps.cavity_amp * port) / drive.probe_amp)
}
