//! Least-squares estimation of device parameters from complex or
//! magnitude-only S11 traces.
//!
//! Traces share one [`SystemParams`] and calibration offset `φ₀`; each keeps
//! its own drive. An optional background `A·e^{i·s·Δ}` multiplies the model.
//! The optimizer is a bounded Levenberg–Marquardt iteration with Marquardt
//! diagonal scaling and an analytic Jacobian.

use std::fmt;

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{transmission, DriveField, SystemParams};
use crate::spectra::{trace, DetuningGrid, SpectrumTrace};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative column norm below which a parameter counts as unidentifiable.
pub const UNIDENTIFIABLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FitParam {
    G,
    KappaC,
    KappaM,
    KappaC1,
    KappaM1,
    CavityFreq,
    MagnonFreq,
    PhaseOffset,
    AmplitudeScale,
    PhaseSlope,
}

impl FitParam {
    pub const ALL: [FitParam; 10] = [
        FitParam::G,
        FitParam::KappaC,
        FitParam::KappaM,
        FitParam::KappaC1,
        FitParam::KappaM1,
        FitParam::CavityFreq,
        FitParam::MagnonFreq,
        FitParam::PhaseOffset,
        FitParam::AmplitudeScale,
        FitParam::PhaseSlope,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FitParam::G => "coupling_g",
            FitParam::KappaC => "kappa_c",
            FitParam::KappaM => "kappa_m",
            FitParam::KappaC1 => "kappa_c1",
            FitParam::KappaM1 => "kappa_m1",
            FitParam::CavityFreq => "cavity_freq",
            FitParam::MagnonFreq => "magnon_freq",
            FitParam::PhaseOffset => "phase_offset",
            FitParam::AmplitudeScale => "amplitude_scale",
            FitParam::PhaseSlope => "phase_slope",
        }
    }

    /// Accepts the report names plus the short forms `g`, `phi0`.
    pub fn parse(s: &str) -> Option<FitParam> {
        let s = s.trim();
        match s {
            "g" => return Some(FitParam::G),
            "phi0" => return Some(FitParam::PhaseOffset),
            _ => {}
        }
        FitParam::ALL.into_iter().find(|p| p.name() == s)
    }

    fn positive(self) -> bool {
        matches!(
            self,
            FitParam::G
                | FitParam::KappaC
                | FitParam::KappaM
                | FitParam::KappaC1
                | FitParam::KappaM1
                | FitParam::AmplitudeScale
        )
    }
}

impl fmt::Display for FitParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Multiplicative background `amplitude_scale · e^{i·phase_slope·Δ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Background {
    pub amplitude_scale: f64,
    /// rad/MHz
    pub phase_slope: f64,
}

impl Default for Background {
    fn default() -> Self {
        Background {
            amplitude_scale: 1.0,
            phase_slope: 0.0,
        }
    }
}

/// Everything a candidate solution can change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelState {
    pub system: SystemParams,
    pub phase_offset: f64,
    pub background: Background,
}

impl ModelState {
    pub fn new(system: SystemParams, phase_offset: f64) -> Self {
        ModelState {
            system,
            phase_offset,
            background: Background::default(),
        }
    }

    pub fn get(&self, p: FitParam) -> f64 {
        let s = &self.system;
        match p {
            FitParam::G => s.coupling_g,
            FitParam::KappaC => s.kappa_c,
            FitParam::KappaM => s.kappa_m,
            FitParam::KappaC1 => s.kappa_c1,
            FitParam::KappaM1 => s.kappa_m1,
            FitParam::CavityFreq => s.cavity_freq,
            FitParam::MagnonFreq => s.magnon_freq,
            FitParam::PhaseOffset => self.phase_offset,
            FitParam::AmplitudeScale => self.background.amplitude_scale,
            FitParam::PhaseSlope => self.background.phase_slope,
        }
    }

    pub fn set(&mut self, p: FitParam, v: f64) {
        let s = &mut self.system;
        match p {
            FitParam::G => s.coupling_g = v,
            FitParam::KappaC => s.kappa_c = v,
            FitParam::KappaM => s.kappa_m = v,
            FitParam::KappaC1 => s.kappa_c1 = v,
            FitParam::KappaM1 => s.kappa_m1 = v,
            FitParam::CavityFreq => s.cavity_freq = v,
            FitParam::MagnonFreq => s.magnon_freq = v,
            FitParam::PhaseOffset => self.phase_offset = v,
            FitParam::AmplitudeScale => self.background.amplitude_scale = v,
            FitParam::PhaseSlope => self.background.phase_slope = v,
        }
    }
}

/// One measured trace and the drive it was taken with. The drive's own
/// `phase_offset` is ignored; the shared [`ModelState::phase_offset`] applies.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub trace: SpectrumTrace,
    pub drive: DriveField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub observations: Vec<Observation>,
    pub free: Vec<FitParam>,
    pub guess: ModelState,
    /// `(lower, upper)` per entry of `free`.
    pub bounds: Vec<(f64, f64)>,
    /// Cavity frequency the observation detunings are measured from.
    pub reference_freq: f64,
    pub max_iter: usize,
    pub warnings: Vec<String>,
}

impl FitProblem {
    /// Problem with the background held at unity (synthetic data).
    pub fn new(observations: Vec<Observation>, guess: ModelState, free: &[FitParam]) -> Result<Self> {
        let mut free_set: Vec<FitParam> = Vec::new();
        for &p in free {
            if !free_set.contains(&p) {
                free_set.push(p);
            }
        }
        let mut warnings = Vec::new();
        let magnitude_only = observations.iter().any(|o| !o.trace.phase_known);
        if magnitude_only && free_set.contains(&FitParam::PhaseSlope) {
            let msg = "magnitude-only traces cannot constrain phase_slope; removed from the free set";
            warn!("{msg}");
            warnings.push(msg.to_string());
            free_set.retain(|&p| p != FitParam::PhaseSlope);
        }
        let bounds = free_set.iter().map(|&p| default_bounds(p)).collect();
        let problem = FitProblem {
            observations,
            free: free_set,
            guess,
            bounds,
            reference_freq: guess.system.cavity_freq,
            max_iter: 500,
            warnings,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Problem for measured data: amplitude scale and phase slope are fitted too.
    pub fn measured(observations: Vec<Observation>, guess: ModelState, free: &[FitParam]) -> Result<Self> {
        let mut all = free.to_vec();
        all.extend([FitParam::AmplitudeScale, FitParam::PhaseSlope]);
        Self::new(observations, guess, &all)
    }

    pub fn with_bounds(mut self, p: FitParam, lower: f64, upper: f64) -> Result<Self> {
        let k = self
            .free
            .iter()
            .position(|&q| q == p)
            .ok_or_else(|| Error::Domain(format!("{p} is not a free parameter")))?;
        self.bounds[k] = (lower, upper);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.free.is_empty() {
            return Err(Error::Domain("no free parameters".into()));
        }
        if self.observations.is_empty() {
            return Err(Error::Domain("no observations".into()));
        }
        if self.observations.iter().any(|o| o.trace.is_empty()) {
            return Err(Error::Domain("empty observation trace".into()));
        }
        for (&p, &(lo, hi)) in self.free.iter().zip(&self.bounds) {
            let v = self.guess.get(p);
            if !(lo <= v && v <= hi) {
                return Err(Error::Domain(format!(
                    "initial {p} = {v} outside bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    fn vector(&self, state: &ModelState) -> DVector<f64> {
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&p| state.get(p)))
    }

    fn state(&self, x: &DVector<f64>) -> ModelState {
        let mut s = self.guess;
        for (&p, &v) in self.free.iter().zip(x.iter()) {
            s.set(p, v);
        }
        s
    }

    fn clamp(&self, x: &mut DVector<f64>) {
        for (v, &(lo, hi)) in x.iter_mut().zip(&self.bounds) {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn residual_len(&self) -> usize {
        self.observations
            .iter()
            .map(|o| if o.trace.phase_known { 2 * o.trace.len() } else { o.trace.len() })
            .sum()
    }
}

fn default_bounds(p: FitParam) -> (f64, f64) {
    if p.positive() {
        (1e-9, f64::INFINITY)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// Model value (with background) at one observation point and, optionally,
/// its derivative with respect to each free parameter.
fn model_point(
    state: &ModelState,
    drive: &DriveField,
    reference_freq: f64,
    x: f64,
    free: Option<&[FitParam]>,
    jac: &mut Vec<Complex64>,
) -> Complex64 {
    let s = &state.system;
    let drive = DriveField {
        phase_offset: state.phase_offset,
        ..*drive
    };
    let detuning = x + (s.cavity_freq - reference_freq);
    let t = transmission(s, &drive, detuning).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
    let bg = Complex64::from_polar(state.background.amplitude_scale, state.background.phase_slope * x);
    let value = bg * t;

    jac.clear();
    let Some(free) = free else { return value };

    let (dc, dm) = s.detunings(detuning);
    let lc = Complex64::new(s.kappa_c, dc);
    let lm = Complex64::new(s.kappa_m, dm);
    let g = s.coupling_g;
    let d = lc * lm + g * g;
    let phasor = drive.pump_phasor();
    let ratio = drive.ratio_delta;
    let root = (s.kappa_c1 * s.kappa_m1).sqrt();
    let n1 = -lm * (2.0 * s.kappa_c1) + I * phasor * (g * 2.0 * root * ratio);

    let dt = |dn: Complex64, dd: Complex64| dn / d - n1 * dd / (d * d);
    let zero = Complex64::new(0.0, 0.0);
    for &p in free {
        let v = match p {
            FitParam::G => bg * dt(I * phasor * (2.0 * root * ratio), Complex64::from(2.0 * g)),
            FitParam::KappaC => bg * dt(zero, lm),
            FitParam::KappaM => bg * dt(Complex64::from(-2.0 * s.kappa_c1), lc),
            FitParam::KappaC1 => {
                let ds = (s.kappa_m1 / s.kappa_c1).sqrt();
                bg * dt(-lm * 2.0 + I * phasor * (g * ratio * ds), zero)
            }
            FitParam::KappaM1 => {
                let ds = (s.kappa_c1 / s.kappa_m1).sqrt();
                bg * dt(I * phasor * (g * ratio * ds), zero)
            }
            FitParam::CavityFreq => bg * dt(zero, I * lm),
            FitParam::MagnonFreq => bg * dt(I * (-2.0 * s.kappa_c1), I * lc),
            FitParam::PhaseOffset => bg * dt(phasor * (g * 2.0 * root * ratio), zero),
            FitParam::AmplitudeScale => {
                Complex64::from_polar(1.0, state.background.phase_slope * x) * t
            }
            FitParam::PhaseSlope => I * x * value,
        };
        jac.push(v);
    }
    value
}

/// Residual rows of one observation; Jacobian rows appended when requested.
fn observation_rows(
    problem: &FitProblem,
    state: &ModelState,
    obs: &Observation,
    with_jacobian: bool,
) -> (Vec<f64>, Vec<f64>) {
    let n = problem.free.len();
    let free = with_jacobian.then_some(problem.free.as_slice());
    let mut res = Vec::new();
    let mut jac_rows = Vec::new();
    let mut jac = Vec::with_capacity(n);
    for (i, &x) in obs.trace.detuning.iter().enumerate() {
        let m = model_point(state, &obs.drive, problem.reference_freq, x, free, &mut jac);
        if obs.trace.phase_known {
            let r = m - obs.trace.t[i];
            res.push(r.re);
            res.push(r.im);
            if with_jacobian {
                jac_rows.extend(jac.iter().map(|j| j.re));
                jac_rows.extend(jac.iter().map(|j| j.im));
            }
        } else {
            let mag = m.norm();
            res.push(mag - obs.trace.magnitude[i]);
            if with_jacobian {
                jac_rows.extend(jac.iter().map(|j| (m.conj() * j).re / mag));
            }
        }
    }
    (res, jac_rows)
}

/// Stacked residuals `model − observation` over all traces: `[Re, Im]` per
/// sample for complex traces, `|model| − |obs|` for magnitude-only traces.
pub fn residual(problem: &FitProblem, candidate: &ModelState) -> Vec<f64> {
    problem
        .observations
        .par_iter()
        .map(|o| observation_rows(problem, candidate, o, false).0)
        .collect::<Vec<_>>()
        .concat()
}

fn residual_and_jacobian(problem: &FitProblem, state: &ModelState) -> (DVector<f64>, DMatrix<f64>) {
    let parts: Vec<(Vec<f64>, Vec<f64>)> = problem
        .observations
        .par_iter()
        .map(|o| observation_rows(problem, state, o, true))
        .collect();
    let n = problem.free.len();
    let m: usize = parts.iter().map(|p| p.0.len()).sum();
    let mut r = Vec::with_capacity(m);
    let mut j = Vec::with_capacity(m * n);
    for (res, rows) in parts {
        r.extend(res);
        j.extend(rows);
    }
    (DVector::from_vec(r), DMatrix::from_row_slice(m, n, &j))
}

/// Analytic Jacobian of [`residual`] (rows follow the residual layout).
pub fn jacobian(problem: &FitProblem, candidate: &ModelState) -> DMatrix<f64> {
    residual_and_jacobian(problem, candidate).1
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub estimate: ModelState,
    pub free: Vec<FitParam>,
    /// `None` marks a parameter the data cannot determine.
    pub std_errors: Vec<Option<f64>>,
    pub residual_norm: f64,
    /// Infinity norm of the projected gradient of `½‖r‖²`.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn value(&self, p: FitParam) -> f64 {
        self.estimate.get(p)
    }

    pub fn std_error(&self, p: FitParam) -> Option<f64> {
        self.free
            .iter()
            .position(|&q| q == p)
            .and_then(|k| self.std_errors[k])
    }
}

/// Columns whose norm is negligible next to the largest one.
fn weak_columns(j: &DMatrix<f64>) -> Vec<bool> {
    let norms: Vec<f64> = j.column_iter().map(|c| c.norm()).collect();
    let max = norms.iter().copied().fold(0.0, f64::max);
    norms.iter().map(|&c| !(c > UNIDENTIFIABLE_TOL * max)).collect()
}

fn projected_gradient(problem: &FitProblem, x: &DVector<f64>, grad: &DVector<f64>, weak: &[bool]) -> f64 {
    let mut worst = 0.0_f64;
    for k in 0..grad.len() {
        if weak[k] {
            continue;
        }
        let (lo, hi) = problem.bounds[k];
        let g = grad[k];
        let blocked = (x[k] <= lo && g > 0.0) || (x[k] >= hi && g < 0.0);
        if !blocked {
            worst = worst.max(g.abs());
        }
    }
    worst
}

/// Bounded Levenberg–Marquardt.
///
/// Iterates until steps stop reducing the cost. Converged means the projected gradient of `½‖r‖²` has infinity norm below
/// `1e-8 · max(1, ‖r‖)`. Hitting `max_iter` or stalling returns the best point
/// with `converged = false`.
pub fn fit_parameters(problem: &FitProblem) -> Result<FitResult> {
    problem.validate()?;
    let n = problem.free.len();
    let mut x = problem.vector(&problem.guess);
    let mut state = problem.state(&x);
    let (mut r, mut j) = residual_and_jacobian(problem, &state);
    let mut cost = 0.5 * r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::Domain("model is not finite at the initial guess".into()));
    }
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    let mut weak = weak_columns(&j);
    let mut gnorm;
    let mut last_gain = f64::INFINITY;

    loop {
        let grad = j.transpose() * &r;
        gnorm = projected_gradient(problem, &x, &grad, &weak);
        let tol = 1e-8 * r.norm().max(1.0);
        // keep stepping while steps still pay off: zero-residual problems
        // converge quadratically well past the gradient threshold
        if gnorm < tol && last_gain < 1e-6 {
            converged = true;
            break;
        }
        if iterations >= problem.max_iter {
            break;
        }
        iterations += 1;

        let mut normal = j.transpose() * &j;
        let diag_max = normal.diagonal().max();
        let scale: Vec<f64> = (0..n)
            .map(|k| normal[(k, k)].max(1e-14 * diag_max).max(f64::MIN_POSITIVE))
            .collect();
        for k in 0..n {
            if weak[k] {
                normal.row_mut(k).fill(0.0);
                normal.column_mut(k).fill(0.0);
                normal[(k, k)] = 1.0;
            }
        }
        let mut rhs = -grad;
        for k in 0..n {
            if weak[k] {
                rhs[k] = 0.0;
            }
        }

        let mut accepted = false;
        for _ in 0..40 {
            let mut a = normal.clone();
            for k in 0..n {
                if !weak[k] {
                    a[(k, k)] += lambda * scale[k];
                }
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&rhs);
            let mut trial = &x + &step;
            problem.clamp(&mut trial);
            let trial_state = problem.state(&trial);
            let trial_r = DVector::from_vec(residual(problem, &trial_state));
            let trial_cost = 0.5 * trial_r.norm_squared();
            if trial_cost.is_finite() && trial_cost < cost {
                last_gain = (cost - trial_cost) / cost;
                x = trial;
                state = trial_state;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                break;
            }
            if trial_cost.is_finite() && trial_cost == cost && (&trial - &x).norm() == 0.0 {
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            let (r_now, j_now) = residual_and_jacobian(problem, &state);
            r = r_now;
            j = j_now;
            weak = weak_columns(&j);
            let grad = j.transpose() * &r;
            gnorm = projected_gradient(problem, &x, &grad, &weak);
            converged = gnorm < 1e-8 * r.norm().max(1.0);
            break;
        }
        let (r_new, j_new) = residual_and_jacobian(problem, &state);
        r = r_new;
        j = j_new;
        weak = weak_columns(&j);
    }

    let residual_norm = r.norm();
    let std_errors = standard_errors(&j, &weak, residual_norm);
    let mut warnings = problem.warnings.clone();
    for (k, &w) in weak.iter().enumerate() {
        if w {
            let msg = format!("{} is not identifiable from these traces", problem.free[k]);
            warn!("{msg}");
            warnings.push(msg);
        }
    }
    Ok(FitResult {
        estimate: state,
        free: problem.free.clone(),
        std_errors,
        residual_norm,
        gradient_norm: gnorm,
        iterations,
        converged,
        warnings,
    })
}

/// `sqrt(diag(s² (JᵀJ)⁻¹))` over identifiable columns, `s² = ‖r‖² / (m − n)`.
fn standard_errors(j: &DMatrix<f64>, weak: &[bool], residual_norm: f64) -> Vec<Option<f64>> {
    let keep: Vec<usize> = (0..weak.len()).filter(|&k| !weak[k]).collect();
    let mut out = vec![None; weak.len()];
    if keep.is_empty() {
        return out;
    }
    let sub = j.select_columns(&keep);
    let m = sub.nrows();
    let dof = m.saturating_sub(keep.len()).max(1);
    let s2 = residual_norm * residual_norm / dof as f64;
    let normal = sub.transpose() * &sub;
    let Some(inv) = normal.try_inverse() else {
        return out;
    };
    for (i, &k) in keep.iter().enumerate() {
        let v = inv[(i, i)];
        out[k] = (v >= 0.0).then(|| (s2 * v).sqrt());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    ComplexGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Standard deviation per quadrature.
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        NoiseModel {
            kind: NoiseKind::ComplexGaussian,
            sigma,
            seed,
        }
    }
}

/// Model trace plus independent Gaussian noise on each quadrature.
pub fn synthesize_trace(
    params: &SystemParams,
    drive: &DriveField,
    grid: &DetuningGrid,
    noise: &NoiseModel,
) -> Result<SpectrumTrace> {
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(Error::invalid("sigma", format!("must be >= 0, got {}", noise.sigma)));
    }
    let clean = trace(params, drive, grid)?;
    if noise.sigma == 0.0 {
        return Ok(clean);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let normal = Normal::new(0.0, noise.sigma).map_err(|e| Error::invalid("sigma", e.to_string()))?;
    let t = clean
        .t
        .iter()
        .map(|z| {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            z + Complex64::new(re, im)
        })
        .collect();
    SpectrumTrace::from_complex(clean.detuning, t)
}
