//! Group delay, phase unwrapping, transmission zeros and the advance/delay
//! transition.
//!
//! Delay is `τ = −(1/2π) ∂arg(t_p)/∂Δ_p` with `Δ_p` in MHz, so `τ` is in µs.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{transmission, transmission_with_slope, DriveField, SystemParams};
use crate::spectra::DetuningGrid;

/// Samples with `|t_p|` below this are flagged instead of differentiated.
pub const ZERO_GUARD: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayMethod {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayTrace {
    pub detuning: Vec<f64>,
    pub unwrapped_phase: Vec<f64>,
    /// Group delay in µs; `±∞` on diverged samples.
    pub delay: Vec<f64>,
    pub diverged: Vec<bool>,
}

/// Removes 2π jumps: each adjacent difference is brought into `(−π, π]` by
/// adding a cumulative integer multiple of 2π to the raw samples.
pub fn unwrap_phase(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let mut turns = 0.0;
    let mut prev: Option<f64> = None;
    for &p in raw {
        if let Some(q) = prev {
            let d = p - q;
            turns += ((PI - d) / TAU).floor();
        }
        out.push(p + TAU * turns);
        prev = Some(p);
    }
    out
}

/// Group delay over a grid.
///
/// `Analytic` differentiates the closed-form response; `FiniteDifference`
/// takes central differences of the unwrapped phase (one-sided at the ends).
pub fn group_delay(
    params: &SystemParams,
    drive: &DriveField,
    grid: &DetuningGrid,
    method: DelayMethod,
) -> Result<DelayTrace> {
    if method == DelayMethod::FiniteDifference && grid.count() < 3 {
        return Err(Error::Domain("finite-difference delay needs at least 3 samples".into()));
    }
    let detuning = grid.values();
    let samples = detuning
        .iter()
        .map(|&d| transmission_with_slope(params, drive, d))
        .collect::<Result<Vec<_>>>()?;
    let raw: Vec<f64> = samples.iter().map(|(t, _)| t.arg()).collect();
    let unwrapped_phase = unwrap_phase(&raw);
    let diverged: Vec<bool> = samples.iter().map(|(t, _)| t.norm() < ZERO_GUARD).collect();
    let n = detuning.len();

    // second order everywhere: central inside, three-point one-sided at the ends
    let fd = |i: usize| -> f64 {
        let p = &unwrapped_phase;
        let x = &detuning;
        let slope = if n < 3 {
            (p[n - 1] - p[0]) / (x[n - 1] - x[0])
        } else if i == 0 {
            one_sided(x[0], x[1], x[2], p[0], p[1], p[2])
        } else if i == n - 1 {
            one_sided(x[n - 1], x[n - 2], x[n - 3], p[n - 1], p[n - 2], p[n - 3])
        } else {
            (p[i + 1] - p[i - 1]) / (x[i + 1] - x[i - 1])
        };
        -slope / TAU
    };

    let delay = (0..n)
        .map(|i| {
            if diverged[i] {
                let s = if n >= 2 { fd(i) } else { 1.0 };
                return f64::INFINITY.copysign(s);
            }
            match method {
                DelayMethod::Analytic => {
                    let (t, slope) = samples[i];
                    -(slope / t).im / TAU
                }
                DelayMethod::FiniteDifference => fd(i),
            }
        })
        .collect();

    Ok(DelayTrace {
        detuning,
        unwrapped_phase,
        delay,
        diverged,
    })
}

/// Derivative at `x0` of the parabola through three samples.
fn one_sided(x0: f64, x1: f64, x2: f64, y0: f64, y1: f64, y2: f64) -> f64 {
    let (h1, h2) = (x1 - x0, x2 - x0);
    (y1 - y0) * h2 / (h1 * (h2 - h1)) - (y2 - y0) * h1 / (h2 * (h2 - h1))
}

/// Analytic delay at a single detuning, µs.
pub fn delay_at(params: &SystemParams, drive: &DriveField, detuning: f64) -> Result<f64> {
    let (t, slope) = transmission_with_slope(params, drive, detuning)?;
    if t.norm() < ZERO_GUARD {
        return Ok(f64::INFINITY);
    }
    Ok(-(slope / t).im / TAU)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroReflectionPoint {
    pub ratio_delta: f64,
    /// Probe detuning `Δ_p` of the zero, MHz.
    pub detuning: f64,
    /// `|t_p|` at the returned point.
    pub residual: f64,
}

/// Real zero of `t_p` in `(δ, Δ_p)` at a fixed effective phase.
///
/// Writing the numerator of `t_p` as `N(Δ, δ)`, its imaginary part is linear
/// in both unknowns and its real part is quadratic in `Δ` and linear in `δ`.
/// Eliminating `δ` leaves a quadratic in `Δ`; each root gives `δ` directly.
/// The smallest admissible ratio in `[0, max_ratio]` is polished by one
/// Newton step on `N` and returned, or `None` if there is none.
pub fn find_zero_reflection(
    params: &SystemParams,
    phase_eff: f64,
    max_ratio: f64,
) -> Option<ZeroReflectionPoint> {
    let k = ZeroCoefficients::new(params);
    if k.pump == 0.0 {
        return None;
    }
    let (sin, cos) = phase_eff.rem_euclid(TAU).sin_cos();
    let d = k.offset;
    let a = cos;
    let b = d * cos + k.damping * sin;
    let c = k.damping_c * d * sin - k.constant * cos;

    let mut best: Option<(f64, f64)> = None;
    for x in quadratic_roots(a, b, c) {
        let ratio = if cos.abs() >= sin.abs() {
            -(k.damping * x + k.damping_c * d) / (k.pump * cos)
        } else {
            (x * (x + d) - k.constant) / (k.pump * sin)
        };
        if !(ratio.is_finite() && ratio >= 0.0 && ratio <= max_ratio) {
            continue;
        }
        if best.is_none_or(|(r, _)| ratio < r) {
            best = Some((ratio, x));
        }
    }
    let (ratio, x) = best?;
    let polished = k.newton(x, ratio, sin, cos);

    let residual_at = |(x, r): (f64, f64)| -> f64 {
        let drive = DriveField::effective(r, phase_eff);
        transmission(params, &drive, x).map(|t| t.norm()).unwrap_or(f64::INFINITY)
    };
    let raw_res = residual_at((x, ratio));
    let pol_res = if polished.1 >= 0.0 {
        residual_at(polished)
    } else {
        f64::INFINITY
    };
    let ((x, ratio), residual) = if pol_res <= raw_res {
        (polished, pol_res)
    } else {
        ((x, ratio), raw_res)
    };
    Some(ZeroReflectionPoint {
        ratio_delta: ratio,
        detuning: x,
        residual,
    })
}

/// Coefficients of the transmission numerator in the probe detuning `x`:
/// `Re N = c − x(x + d) + G δ sin φ`, `Im N = s x + κ' d + G δ cos φ`.
struct ZeroCoefficients {
    /// `d = ω_m − ω_c`
    offset: f64,
    /// `κ' = κ_c − 2η_cκ_c`
    damping_c: f64,
    /// `s = κ' + κ_m`
    damping: f64,
    /// `c = κ_cκ_m + g² − 2η_cκ_cκ_m`
    constant: f64,
    /// `G = g √(2η_cκ_c) √(2η_mκ_m)`
    pump: f64,
}

impl ZeroCoefficients {
    fn new(p: &SystemParams) -> Self {
        let damping_c = p.kappa_c - 2.0 * p.eta_c() * p.kappa_c;
        ZeroCoefficients {
            offset: p.magnon_freq - p.cavity_freq,
            damping_c,
            damping: damping_c + p.kappa_m,
            constant: p.kappa_c * p.kappa_m + p.coupling_g * p.coupling_g
                - 2.0 * p.eta_c() * p.kappa_c * p.kappa_m,
            pump: p.coupling_g * p.cavity_port() * p.magnon_port(),
        }
    }

    fn numerator(&self, x: f64, ratio: f64, sin: f64, cos: f64) -> Complex64 {
        let d = self.offset;
        Complex64::new(
            self.constant - x * (x + d) + self.pump * ratio * sin,
            self.damping * x + self.damping_c * d + self.pump * ratio * cos,
        )
    }

    fn newton(&self, x: f64, ratio: f64, sin: f64, cos: f64) -> (f64, f64) {
        let n = self.numerator(x, ratio, sin, cos);
        // Jacobian of (Re N, Im N) with respect to (x, ratio)
        let (j11, j12) = (-(2.0 * x + self.offset), self.pump * sin);
        let (j21, j22) = (self.damping, self.pump * cos);
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            return (x, ratio);
        }
        let dx = (n.re * j22 - j12 * n.im) / det;
        let dr = (j11 * n.im - j21 * n.re) / det;
        (x - dx, ratio - dr)
    }
}

/// Real roots of `a x² + b x + c`, using the cancellation-free form.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-14 * scale {
        return if b != 0.0 { vec![-c / b] } else { Vec::new() };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + disc.sqrt().copysign(b));
    let mut roots = vec![q / a];
    if q != 0.0 {
        roots.push(c / q);
    }
    roots.retain(|r| r.is_finite());
    roots
}

/// Signed extremal analytic delay within the narrow-feature window
/// (`5 × (κ_m + g²/κ_c)` around the magnon line) for each ratio.
pub fn delay_extremum_vs_ratio(
    params: &SystemParams,
    phase_eff: f64,
    delta_axis: &[f64],
    grid: &DetuningGrid,
) -> Result<Vec<(f64, f64)>> {
    if delta_axis.is_empty() {
        return Err(Error::Domain("ratio axis is empty".into()));
    }
    let center = params.magnon_line_center();
    let window = 5.0 * params.narrow_width();
    let points: Vec<f64> = grid
        .values()
        .into_iter()
        .filter(|x| (x - center).abs() <= window)
        .collect();
    if points.is_empty() {
        return Err(Error::Domain("grid has no samples inside the narrow-feature window".into()));
    }
    delta_axis
        .par_iter()
        .map(|&ratio| {
            let drive = DriveField::effective(ratio, phase_eff);
            let mut best = 0.0_f64;
            for &x in &points {
                let tau = delay_at(params, &drive, x)?;
                if tau.is_finite() && tau.abs() > best.abs() {
                    best = tau;
                }
            }
            Ok((ratio, best))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpSign {
    AdvanceToDelay,
    DelayToAdvance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionReport {
    /// Midpoint of the two ratios straddling the jump.
    pub critical_ratio: f64,
    pub jump_sign: JumpSign,
    /// Most negative delay on the curve, µs.
    pub peak_advance: f64,
    /// Most positive delay on the curve, µs.
    pub peak_delay: f64,
}

/// First sign change in the delay-vs-ratio curve whose step exceeds ten times
/// the median step size.
pub fn detect_abrupt_transition(curve: &[(f64, f64)]) -> Result<Option<TransitionReport>> {
    if curve.len() < 3 {
        return Err(Error::Domain(format!(
            "transition detection needs >= 3 points, got {}",
            curve.len()
        )));
    }
    if curve.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Domain("delay curve must be sorted by strictly increasing ratio".into()));
    }
    let mut steps: Vec<f64> = curve.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
    let typical = crate::spectra::median(&mut steps);

    let jump = curve.windows(2).find(|w| {
        let (a, b) = (w[0].1, w[1].1);
        a * b < 0.0 && (b - a).abs() > 10.0 * typical
    });
    Ok(jump.map(|w| {
        let peak_advance = curve.iter().map(|p| p.1).fold(0.0, f64::min);
        let peak_delay = curve.iter().map(|p| p.1).fold(0.0, f64::max);
        TransitionReport {
            critical_ratio: 0.5 * (w[0].0 + w[1].0),
            jump_sign: if w[0].1 < 0.0 {
                JumpSign::AdvanceToDelay
            } else {
                JumpSign::DelayToAdvance
            },
            peak_advance,
            peak_delay,
        }
    }))
}
