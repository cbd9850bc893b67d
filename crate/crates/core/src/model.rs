//! Physical parameters and the closed-form steady state of the two-tone driven
//! cavity-magnon system.
//!
//! All rates are half-linewidths in linear-frequency MHz, exactly as they enter
//! the `(iΔ + κ)` factors of the response function. Detunings are linear
//! frequencies as well: `Δ_p = ω_c − ω_p`, `Δ_m = ω_m − ω_p`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex field amplitude or transmission coefficient.
pub type ComplexAmplitude = Complex64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Absolute tolerance used when deciding critical coupling.
pub const CRITICAL_TOL: f64 = 1e-12;

/// Smallest |D| accepted by the steady-state solve.
pub const SINGULAR_TOL: f64 = 1e-15;

/// Model constants of one cavity-magnon device. Frequencies and rates in MHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub cavity_freq: f64,
    pub magnon_freq: f64,
    pub coupling_g: f64,
    /// Total cavity half-linewidth.
    pub kappa_c: f64,
    /// Total magnon half-linewidth.
    pub kappa_m: f64,
    /// External rate of the probe port.
    pub kappa_c1: f64,
    /// External rate of the pump loop.
    pub kappa_m1: f64,
}

impl SystemParams {
    /// Resonant device (`ω_c = ω_m = 0`, i.e. frequencies expressed as detunings).
    pub fn resonant(
        coupling_g: f64,
        kappa_c: f64,
        kappa_m: f64,
        kappa_c1: f64,
        kappa_m1: f64,
    ) -> Result<Self> {
        let p = SystemParams {
            cavity_freq: 0.0,
            magnon_freq: 0.0,
            coupling_g,
            kappa_c,
            kappa_m,
            kappa_c1,
            kappa_m1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("cavity_freq", self.cavity_freq),
            ("magnon_freq", self.magnon_freq),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::invalid(name, format!("must be finite, got {v}")));
            }
        }
        let positive = [
            ("coupling_g", self.coupling_g),
            ("kappa_c", self.kappa_c),
            ("kappa_m", self.kappa_m),
            ("kappa_c1", self.kappa_c1),
            ("kappa_m1", self.kappa_m1),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be strictly positive, got {v}"),
                ));
            }
        }
        if self.kappa_c1 > self.kappa_c {
            return Err(Error::invalid(
                "kappa_c1",
                format!(
                    "probe-port rate {} exceeds total cavity rate {}",
                    self.kappa_c1, self.kappa_c
                ),
            ));
        }
        if self.kappa_m1 > self.kappa_m {
            return Err(Error::invalid(
                "kappa_m1",
                format!(
                    "pump-loop rate {} exceeds total magnon rate {}",
                    self.kappa_m1, self.kappa_m
                ),
            ));
        }
        Ok(())
    }

    pub fn eta_c(&self) -> f64 {
        self.kappa_c1 / self.kappa_c
    }

    pub fn eta_m(&self) -> f64 {
        self.kappa_m1 / self.kappa_m
    }

    /// `√(2 η_c κ_c)`, the probe-port coupling amplitude.
    pub fn cavity_port(&self) -> f64 {
        (2.0 * self.eta_c() * self.kappa_c).sqrt()
    }

    /// `√(2 η_m κ_m)`, the pump-loop coupling amplitude.
    pub fn magnon_port(&self) -> f64 {
        (2.0 * self.eta_m() * self.kappa_m).sqrt()
    }

    /// `(Δ_c, Δ_m)` for a probe detuning `Δ_p = ω_c − ω_p`.
    pub fn detunings(&self, detuning: f64) -> (f64, f64) {
        (detuning, detuning + (self.magnon_freq - self.cavity_freq))
    }

    /// Probe detuning at which the magnon is resonant with the probe.
    pub fn magnon_line_center(&self) -> f64 {
        self.cavity_freq - self.magnon_freq
    }

    pub fn probe_detuning(&self, probe_freq: f64) -> f64 {
        self.cavity_freq - probe_freq
    }

    /// Same device with the coupling switched off. Bypasses validation since
    /// `g = 0` is only meaningful as a reference curve.
    pub fn uncoupled(&self) -> Self {
        SystemParams {
            coupling_g: 0.0,
            ..*self
        }
    }

    /// Rates, coupling and frequencies multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        SystemParams {
            cavity_freq: self.cavity_freq * s,
            magnon_freq: self.magnon_freq * s,
            coupling_g: self.coupling_g * s,
            kappa_c: self.kappa_c * s,
            kappa_m: self.kappa_m * s,
            kappa_c1: self.kappa_c1 * s,
            kappa_m1: self.kappa_m1 * s,
        }
    }

    /// Half-width of the narrow magnon feature, `κ_m + g²/κ_c`.
    pub fn narrow_width(&self) -> f64 {
        self.kappa_m + self.coupling_g * self.coupling_g / self.kappa_c
    }
}

/// Two-tone drive. Phases are stored as given; the model only ever uses
/// `phase_phi + phase_offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveField {
    /// Pump-to-probe amplitude ratio `ε_m / ε_c`.
    pub ratio_delta: f64,
    /// Pump phase relative to the probe, radians.
    pub phase_phi: f64,
    /// Hardware calibration offset added to `phase_phi`, radians.
    pub phase_offset: f64,
    /// Probe amplitude `ε_c`; outputs are ratios so this rarely matters.
    pub probe_amp: f64,
}

impl Default for DriveField {
    fn default() -> Self {
        DriveField {
            ratio_delta: 0.0,
            phase_phi: 0.0,
            phase_offset: PI,
            probe_amp: 1.0,
        }
    }
}

impl DriveField {
    /// Drive with the default calibration offset of π.
    pub fn new(ratio_delta: f64, phase_phi: f64) -> Self {
        DriveField {
            ratio_delta,
            phase_phi,
            ..Default::default()
        }
    }

    /// Drive specified directly by its effective phase (offset zero).
    pub fn effective(ratio_delta: f64, phase_eff: f64) -> Self {
        DriveField {
            ratio_delta,
            phase_phi: phase_eff,
            phase_offset: 0.0,
            probe_amp: 1.0,
        }
    }

    pub fn with_ratio(self, ratio_delta: f64) -> Self {
        DriveField {
            ratio_delta,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio_delta.is_finite() && self.ratio_delta >= 0.0) {
            return Err(Error::invalid(
                "delta",
                format!("must be finite and >= 0, got {}", self.ratio_delta),
            ));
        }
        if !self.phase_phi.is_finite() {
            return Err(Error::invalid("phi", "must be finite"));
        }
        if !self.phase_offset.is_finite() {
            return Err(Error::invalid("phase_offset", "must be finite"));
        }
        if !(self.probe_amp.is_finite() && self.probe_amp > 0.0) {
            return Err(Error::invalid(
                "probe_amp",
                format!("must be strictly positive, got {}", self.probe_amp),
            ));
        }
        Ok(())
    }

    pub fn effective_phase(&self) -> f64 {
        self.phase_phi + self.phase_offset
    }

    /// `e^{−i(φ + φ₀)}`, evaluated on the phase reduced into `[0, 2π)`.
    pub fn pump_phasor(&self) -> Complex64 {
        let (s, c) = self.effective_phase().rem_euclid(TAU).sin_cos();
        Complex64::new(c, -s)
    }

    pub fn pump_amp(&self) -> f64 {
        self.ratio_delta * self.probe_amp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CouplingRegime {
    Overcoupled,
    Critical,
    Undercoupled,
}

/// Classifies an external coupling ratio `η = κ_ext / κ_total` against 1/2.
pub fn classify_coupling(eta: f64) -> Result<CouplingRegime> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!(
            "coupling ratio must lie in (0, 1], got {eta}"
        )));
    }
    Ok(if (eta - 0.5).abs() <= CRITICAL_TOL {
        CouplingRegime::Critical
    } else if eta > 0.5 {
        CouplingRegime::Overcoupled
    } else {
        CouplingRegime::Undercoupled
    })
}

/// Steady-state intracavity and magnon amplitudes `⟨a⟩`, `⟨m⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeAmplitudes {
    pub cavity_amp: Complex64,
    pub magnon_amp: Complex64,
}

/// Probe and pump contributions to the transmission; `total = probe + pump`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionParts {
    pub probe: Complex64,
    pub pump: Complex64,
}

impl TransmissionParts {
    pub fn total(&self) -> Complex64 {
        self.probe + self.pump
    }
}

/// Complex loss factors `(iΔ_c + κ_c, iΔ_m + κ_m)` and `D = L_c L_m + g²`.
fn response(params: &SystemParams, detuning: f64) -> (Complex64, Complex64, Complex64) {
    let (dc, dm) = params.detunings(detuning);
    let lc = Complex64::new(params.kappa_c, dc);
    let lm = Complex64::new(params.kappa_m, dm);
    let g = params.coupling_g;
    (lc, lm, lc * lm + g * g)
}

fn checked_denominator(d: Complex64) -> Result<Complex64> {
    let n = d.norm();
    if !(n >= SINGULAR_TOL) {
        return Err(Error::Singular(n));
    }
    Ok(d)
}

/// Solves the 2×2 steady-state system
///
/// ```text
/// (iΔ_c + κ_c)⟨a⟩ + i g ⟨m⟩ = √(2η_cκ_c) ε_c
/// i g ⟨a⟩ + (iΔ_m + κ_m)⟨m⟩ = √(2η_mκ_m) ε_m e^{−i(φ+φ₀)}
/// ```
///
/// at probe detuning `Δ_p` (MHz).
pub fn steady_state(
    params: &SystemParams,
    drive: &DriveField,
    detuning: f64,
) -> Result<ModeAmplitudes> {
    let (lc, lm, d) = response(params, detuning);
    let d = checked_denominator(d)?;
    let (rhs_a, rhs_m) = drive_terms(params, drive);
    let ig = I * params.coupling_g;
    Ok(ModeAmplitudes {
        cavity_amp: (rhs_a * lm - ig * rhs_m) / d,
        magnon_amp: (lc * rhs_m - ig * rhs_a) / d,
    })
}

/// Right-hand side of the steady-state system (drive terms of each mode).
pub(crate) fn drive_terms(params: &SystemParams, drive: &DriveField) -> (Complex64, Complex64) {
    let rhs_a = Complex64::from(params.cavity_port() * drive.probe_amp);
    let rhs_m = drive.pump_phasor() * (params.magnon_port() * drive.pump_amp());
    (rhs_a, rhs_m)
}

/// `ε_out = ε_c − √(2η_cκ_c)⟨a⟩`.
pub fn output_field(params: &SystemParams, cavity_amp: Complex64, probe_amp: f64) -> Complex64 {
    Complex64::from(probe_amp) - cavity_amp * params.cavity_port()
}

/// Probe and pump contributions to `t_p` at detuning `Δ_p`.
pub fn transmission_parts(
    params: &SystemParams,
    drive: &DriveField,
    detuning: f64,
) -> Result<TransmissionParts> {
    let (_, lm, d) = response(params, detuning);
    let d = checked_denominator(d)?;
    let probe = Complex64::from(1.0) - lm * (2.0 * params.eta_c() * params.kappa_c) / d;
    let pump = I
        * (params.coupling_g * params.cavity_port() * params.magnon_port() * drive.ratio_delta)
        * drive.pump_phasor()
        / d;
    Ok(TransmissionParts { probe, pump })
}

/// Complex probe transmission `t_p = ε_out / ε_c`.
pub fn transmission(params: &SystemParams, drive: &DriveField, detuning: f64) -> Result<Complex64> {
    transmission_parts(params, drive, detuning).map(|p| p.total())
}

/// `t_p` together with `∂t_p/∂Δ_p`. Both `Δ_c` and `Δ_m` move with the probe.
pub fn transmission_with_slope(
    params: &SystemParams,
    drive: &DriveField,
    detuning: f64,
) -> Result<(Complex64, Complex64)> {
    let (lc, lm, d) = response(params, detuning);
    let d = checked_denominator(d)?;
    let loss = lm * (2.0 * params.eta_c() * params.kappa_c);
    let pump = I
        * (params.coupling_g * params.cavity_port() * params.magnon_port() * drive.ratio_delta)
        * drive.pump_phasor();
    let t = Complex64::from(1.0) + (pump - loss) / d;
    let dloss = I * (2.0 * params.eta_c() * params.kappa_c);
    let dd = I * (lc + lm);
    let slope = -dloss / d - (pump - loss) * dd / (d * d);
    Ok((t, slope))
}
