//! Spectra on detuning grids, phase/ratio sweeps, extremum extraction and
//! interference-regime labels.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{transmission, DriveField, SystemParams};

/// Uniform, strictly increasing detuning grid in MHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningGrid {
    start: f64,
    stop: f64,
    count: usize,
}

impl Default for DetuningGrid {
    /// `[−60, 60]` MHz in 0.1 MHz steps.
    fn default() -> Self {
        DetuningGrid {
            start: -60.0,
            stop: 60.0,
            count: 1201,
        }
    }
}

impl DetuningGrid {
    pub fn new(start: f64, stop: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::invalid("count", format!("grid needs >= 2 points, got {count}")));
        }
        if !(start.is_finite() && stop.is_finite() && stop > start) {
            return Err(Error::invalid(
                "stop",
                format!("grid must satisfy start < stop, got [{start}, {stop}]"),
            ));
        }
        Ok(DetuningGrid { start, stop, count })
    }

    /// Symmetric grid `[c − half_span, c + half_span]` with spacing at most `max_step`.
    pub fn centered(center: f64, half_span: f64, max_step: f64) -> Result<Self> {
        if !(max_step > 0.0) {
            return Err(Error::invalid("step", "must be positive"));
        }
        let intervals = (2.0 * half_span / max_step).ceil().max(1.0) as usize;
        Self::new(center - half_span, center + half_span, intervals + 1)
    }

    /// Grid spanning ±10 κ_c around the magnon line, fine enough to resolve
    /// the narrow feature with at least 30 samples per half-width.
    pub fn wide(params: &SystemParams) -> Result<Self> {
        let step = (params.narrow_width() / 30.0).min(0.05);
        Self::centered(params.magnon_line_center(), 10.0 * params.kappa_c, step)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn stop(&self) -> f64 {
        self.stop
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.count - 1) as f64
    }

    pub fn value(&self, i: usize) -> f64 {
        // weighted form keeps symmetric grids exact (e.g. −0.1, not −0.0999…)
        let n = (self.count - 1) as f64;
        let k = i as f64;
        ((n - k) * self.start + k * self.stop) / n
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.value(i)).collect()
    }
}

/// Decibel conversion result; `floored` marks a non-positive input mapped to −∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Db {
    pub value: f64,
    pub floored: bool,
}

/// `20 log₁₀(magnitude)`.
pub fn to_db(magnitude: f64) -> Db {
    if magnitude > 0.0 {
        Db {
            value: 20.0 * magnitude.log10(),
            floored: false,
        }
    } else {
        Db {
            value: f64::NEG_INFINITY,
            floored: true,
        }
    }
}

/// Complex transmission samples on a set of detunings.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    pub detuning: Vec<f64>,
    pub t: Vec<Complex64>,
    pub magnitude: Vec<f64>,
    pub db: Vec<f64>,
    /// False for magnitude-only data; `t` then holds `magnitude + 0i`.
    pub phase_known: bool,
}

impl SpectrumTrace {
    pub fn from_complex(detuning: Vec<f64>, t: Vec<Complex64>) -> Result<Self> {
        check_axis(&detuning, t.len())?;
        let magnitude: Vec<f64> = t.iter().map(|z| z.norm()).collect();
        let db = magnitude.iter().map(|&m| to_db(m).value).collect();
        Ok(SpectrumTrace {
            detuning,
            t,
            magnitude,
            db,
            phase_known: true,
        })
    }

    pub fn from_magnitude(detuning: Vec<f64>, magnitude: Vec<f64>) -> Result<Self> {
        check_axis(&detuning, magnitude.len())?;
        let t = magnitude.iter().map(|&m| Complex64::new(m, 0.0)).collect();
        let db = magnitude.iter().map(|&m| to_db(m).value).collect();
        Ok(SpectrumTrace {
            detuning,
            t,
            magnitude,
            db,
            phase_known: false,
        })
    }

    pub fn len(&self) -> usize {
        self.detuning.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detuning.is_empty()
    }

    pub fn span(&self) -> f64 {
        match (self.detuning.first(), self.detuning.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Linear interpolation of the magnitude; clamps outside the axis.
    pub fn magnitude_at(&self, detuning: f64) -> f64 {
        let x = &self.detuning;
        let y = &self.magnitude;
        if detuning <= x[0] {
            return y[0];
        }
        if detuning >= x[x.len() - 1] {
            return y[y.len() - 1];
        }
        let j = x.partition_point(|&v| v <= detuning);
        let (x0, x1) = (x[j - 1], x[j]);
        let w = (detuning - x0) / (x1 - x0);
        y[j - 1] + w * (y[j] - y[j - 1])
    }

    /// Median magnitude over the outer 10% of samples (5% at each end).
    pub fn baseline(&self) -> f64 {
        let n = self.len();
        let tail = ((n as f64 * 0.05).ceil() as usize).max(1).min(n);
        let mut outer: Vec<f64> = self.magnitude[..tail]
            .iter()
            .chain(&self.magnitude[n - tail..])
            .copied()
            .collect();
        median(&mut outer)
    }
}

fn check_axis(detuning: &[f64], len: usize) -> Result<()> {
    if detuning.is_empty() {
        return Err(Error::Domain("trace has no samples".into()));
    }
    if detuning.len() != len {
        return Err(Error::Domain(format!(
            "detuning axis has {} samples but data has {len}",
            detuning.len()
        )));
    }
    if detuning.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("detuning axis must be strictly increasing".into()));
    }
    Ok(())
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pointwise transmission over the grid.
pub fn trace(params: &SystemParams, drive: &DriveField, grid: &DetuningGrid) -> Result<SpectrumTrace> {
    let detuning = grid.values();
    let t = detuning
        .iter()
        .map(|&d| transmission(params, drive, d))
        .collect::<Result<Vec<_>>>()?;
    SpectrumTrace::from_complex(detuning, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Phase,
    Ratio,
}

impl SweepAxis {
    /// Default axis: φ over `[0, 2π]` or δ over `[0, 6.5]`.
    pub fn default_values(self, count: usize) -> Vec<f64> {
        let stop = match self {
            SweepAxis::Phase => TAU,
            SweepAxis::Ratio => 6.5,
        };
        let n = count.max(2);
        (0..n).map(|i| stop * i as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepMap {
    pub sweep_axis: SweepAxis,
    pub axis_values: Vec<f64>,
    pub traces: Vec<SpectrumTrace>,
}

/// One trace per axis value; the other drive setting is taken from `fixed`.
/// Phase values replace `phase_phi`, so the calibration offset still applies.
pub fn sweep(
    params: &SystemParams,
    fixed: &DriveField,
    sweep_axis: SweepAxis,
    axis: &[f64],
    grid: &DetuningGrid,
) -> Result<SweepMap> {
    if axis.is_empty() {
        return Err(Error::Domain("sweep axis is empty".into()));
    }
    let traces = axis
        .par_iter()
        .map(|&v| {
            let drive = match sweep_axis {
                SweepAxis::Phase => DriveField {
                    phase_phi: v,
                    ..*fixed
                },
                SweepAxis::Ratio => fixed.with_ratio(v),
            };
            trace(params, &drive, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepMap {
        sweep_axis,
        axis_values: axis.to_vec(),
        traces,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub detuning: f64,
    pub magnitude: f64,
    pub is_peak: bool,
}

fn window_indices(trace: &SpectrumTrace, center: f64, window: f64) -> Result<(usize, usize)> {
    if !(window > 0.0) {
        return Err(Error::Domain(format!("window must be positive, got {window}")));
    }
    let x = &trace.detuning;
    let (lo, hi) = (center - window, center + window);
    if lo < x[0] || hi > x[x.len() - 1] {
        return Err(Error::Domain(format!(
            "window [{lo}, {hi}] MHz exceeds the trace span [{}, {}]",
            x[0],
            x[x.len() - 1]
        )));
    }
    let i0 = x.partition_point(|&v| v < lo);
    let i1 = x.partition_point(|&v| v <= hi);
    if i1 <= i0 {
        return Err(Error::Domain("window contains no samples".into()));
    }
    Ok((i0, i1))
}

/// Magnitude extremum within `|Δ_p − Δ_line| ≤ window` that departs most from
/// the straight line joining the magnitudes at the window edges.
pub fn extremum_near_resonance(
    params: &SystemParams,
    trace: &SpectrumTrace,
    window: f64,
) -> Result<Extremum> {
    let center = params.magnon_line_center();
    let (i0, i1) = window_indices(trace, center, window)?;
    let (xl, xr) = (center - window, center + window);
    let (yl, yr) = (trace.magnitude_at(xl), trace.magnitude_at(xr));
    let local = |x: f64| yl + (yr - yl) * (x - xl) / (xr - xl);
    let best = (i0..i1)
        .max_by(|&a, &b| {
            let da = (trace.magnitude[a] - local(trace.detuning[a])).abs();
            let db = (trace.magnitude[b] - local(trace.detuning[b])).abs();
            da.total_cmp(&db)
        })
        .expect("non-empty window");
    Ok(Extremum {
        detuning: trace.detuning[best],
        magnitude: trace.magnitude[best],
        is_peak: trace.magnitude[best] > local(trace.detuning[best]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeLabel {
    Mit,
    Miabs,
    Miamp,
    Fano,
    Null,
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeLabel::Mit => "MIT",
            RegimeLabel::Miabs => "MIABS",
            RegimeLabel::Miamp => "MIAMP",
            RegimeLabel::Fano => "Fano",
            RegimeLabel::Null => "Null",
        })
    }
}

/// Decision thresholds for [`classify_regime`]. All contrasts are absolute
/// magnitude differences from the uncoupled-cavity background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeThresholds {
    /// A peak above `baseline · (1 + peak_tol)` is amplification.
    pub peak_tol: f64,
    /// Dominant lobes smaller than this are no feature at all.
    pub contrast_floor: f64,
    /// A counter-signed lobe at least this large makes the line shape Fano.
    pub fano_lobe: f64,
    /// Half-width of the analysis window; `None` uses 5 × (κ_m + g²/κ_c).
    pub window: Option<f64>,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds {
            peak_tol: 0.10,
            contrast_floor: 0.045,
            fano_lobe: 0.13,
            window: None,
        }
    }
}

/// Shape of the narrow feature relative to the uncoupled-cavity background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureShape {
    /// Signed dominant departure `T − T_bare` and where it occurs.
    pub major: f64,
    pub major_at: f64,
    pub major_magnitude: f64,
    /// Largest departure of the opposite sign (≥ 0).
    pub minor: f64,
    pub baseline: f64,
}

pub fn feature_shape(
    params: &SystemParams,
    trace: &SpectrumTrace,
    thresholds: &RegimeThresholds,
) -> Result<FeatureShape> {
    let width = params.narrow_width();
    if trace.span() < 10.0 * width {
        return Err(Error::Domain(format!(
            "trace spans {} MHz, need at least 10 narrow-feature widths ({} MHz)",
            trace.span(),
            10.0 * width
        )));
    }
    let window = thresholds.window.unwrap_or(5.0 * width);
    let (i0, i1) = window_indices(trace, params.magnon_line_center(), window)?;
    let bare = params.uncoupled();
    let drive = DriveField::default();
    let mut dev = Vec::with_capacity(i1 - i0);
    for i in i0..i1 {
        let b = transmission(&bare, &drive, trace.detuning[i])?.norm();
        dev.push(trace.magnitude[i] - b);
    }
    let k = (0..dev.len())
        .max_by(|&a, &b| dev[a].abs().total_cmp(&dev[b].abs()))
        .expect("non-empty window");
    let major = dev[k];
    let minor = dev
        .iter()
        .filter(|&&d| d * major < 0.0)
        .fold(0.0_f64, |m, d| m.max(d.abs()));
    Ok(FeatureShape {
        major,
        major_at: trace.detuning[i0 + k],
        major_magnitude: trace.magnitude[i0 + k],
        minor,
        baseline: trace.baseline(),
    })
}

/// Labels the narrow feature near the magnon line.
///
/// Order of decisions: a dominant lobe below `contrast_floor` is `Null`; a
/// counter lobe of at least `fano_lobe` is `Fano`; otherwise a dip is `MIABS`
/// and a peak is `MIT` or `MIAMP` depending on whether it clears the
/// far-detuned baseline by more than `peak_tol`. The baseline is the median
/// of the outer 10% of the trace, so the trace should reach far enough out
/// (see [`DetuningGrid::wide`]).
pub fn classify_regime(
    params: &SystemParams,
    trace: &SpectrumTrace,
    thresholds: &RegimeThresholds,
) -> Result<RegimeLabel> {
    let shape = feature_shape(params, trace, thresholds)?;
    Ok(if shape.major.abs() < thresholds.contrast_floor {
        RegimeLabel::Null
    } else if shape.minor >= thresholds.fano_lobe {
        RegimeLabel::Fano
    } else if shape.major < 0.0 {
        RegimeLabel::Miabs
    } else if shape.major_magnitude <= shape.baseline * (1.0 + thresholds.peak_tol) {
        RegimeLabel::Mit
    } else {
        RegimeLabel::Miamp
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn device() -> SystemParams {
        SystemParams::resonant(7.6, 113.9, 1.2, 21.8, 0.6).unwrap()
    }

    fn label(delta: f64, phase_eff: f64) -> RegimeLabel {
        let p = device();
        let tr = trace(&p, &DriveField::effective(delta, phase_eff), &DetuningGrid::wide(&p).unwrap())
            .unwrap();
        classify_regime(&p, &tr, &RegimeThresholds::default()).unwrap()
    }

    #[test]
    fn grid_values() {
        let g = DetuningGrid::default();
        let v = g.values();
        assert_eq!(v.len(), 1201);
        assert_eq!(v[0], -60.0);
        assert_eq!(v[1200], 60.0);
        assert!((v[600]).abs() < 1e-12);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!(DetuningGrid::new(0.0, 1.0, 1).is_err());
        assert!(DetuningGrid::new(1.0, 1.0, 5).is_err());
    }

    #[test]
    fn db_values() {
        assert_eq!(to_db(1.0).value, 0.0);
        assert!((to_db(0.01).value + 40.0).abs() < 1e-12);
        assert!((to_db(0.73092).value + 2.723).abs() < 5e-4);
        let z = to_db(0.0);
        assert!(z.floored && z.value == f64::NEG_INFINITY);
        assert!(to_db(-1.0).floored);
    }

    #[test]
    fn mit_trace_shape() {
        let p = device();
        let tr = trace(&p, &DriveField::default(), &DetuningGrid::default()).unwrap();
        assert!((tr.magnitude[600] - 0.73092).abs() < 1e-5);
        // transparency peak sits inside the cavity dip: minima a few MHz out
        let (imin, _) = tr.magnitude[..600]
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!(tr.detuning[imin] < -0.5 && tr.detuning[imin] > -10.0);
    }

    #[test]
    fn bare_cavity_dip() {
        let p = device().uncoupled();
        let tr = trace(&p, &DriveField::default(), &DetuningGrid::default()).unwrap();
        let e = extremum_near_resonance(&p, &tr, 5.0).unwrap();
        assert!(!e.is_peak);
        assert!(e.detuning.abs() < 1e-9);
        assert!((e.magnitude - (1.0 - 2.0 * p.eta_c())).abs() < 1e-12);
    }

    #[test]
    fn mit_extremum() {
        let p = device();
        let tr = trace(&p, &DriveField::default(), &DetuningGrid::default()).unwrap();
        let e = extremum_near_resonance(&p, &tr, 5.0).unwrap();
        assert!(e.is_peak && e.detuning.abs() < 1e-9);
        assert!((e.magnitude - 0.73092).abs() < 1e-5);
        assert!(extremum_near_resonance(&p, &tr, 100.0).is_err());
        assert!(extremum_near_resonance(&p, &tr, 0.0).is_err());
    }

    #[test]
    fn phase_free_without_pump() {
        let p = device();
        let g = DetuningGrid::default();
        let a = trace(&p, &DriveField::new(0.0, 0.0), &g).unwrap();
        let b = trace(&p, &DriveField::new(0.0, 2.1), &g).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn even_at_zero_ratio() {
        let p = device();
        let tr = trace(&p, &DriveField::default(), &DetuningGrid::default()).unwrap();
        let n = tr.len();
        for i in 0..n / 2 {
            assert!((tr.magnitude[i] - tr.magnitude[n - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn baseline_on_wide_grid() {
        let p = device();
        let g = DetuningGrid::centered(0.0, 6.0 * p.kappa_c, 0.5).unwrap();
        for drive in [DriveField::default(), DriveField::effective(4.0, 1.35 * PI)] {
            let tr = trace(&p, &drive, &g).unwrap();
            assert!((tr.baseline() - 1.0).abs() < 0.01, "{}", tr.baseline());
        }
    }

    #[test]
    fn phase_sweep_is_periodic() {
        let p = device();
        let g = DetuningGrid::new(-10.0, 10.0, 201).unwrap();
        let base = DriveField::new(1.7, 0.0);
        let axis: Vec<f64> = (0..9).map(|k| k as f64 * PI / 4.0).collect();
        let shifted: Vec<f64> = axis.iter().map(|v| v + TAU).collect();
        let a = sweep(&p, &base, SweepAxis::Phase, &axis, &g).unwrap();
        let b = sweep(&p, &base, SweepAxis::Phase, &shifted, &g).unwrap();
        for (ta, tb) in a.traces.iter().zip(&b.traces) {
            for (x, y) in ta.t.iter().zip(&tb.t) {
                assert!((x - y).norm() < 1e-13);
            }
        }
        // endpoints 0 and 2π of the default axis coincide
        let first = &a.traces[0];
        let last = &a.traces[8];
        for (x, y) in first.t.iter().zip(&last.t) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn ratio_sweep_dip_and_peak() {
        let p = device();
        let g = DetuningGrid::new(-8.0, 8.0, 1601).unwrap();
        let axis = SweepAxis::Ratio.default_values(66);
        let destructive = sweep(&p, &DriveField::effective(0.0, 1.35 * PI), SweepAxis::Ratio, &axis, &g)
            .unwrap();
        let mins: Vec<f64> = destructive
            .traces
            .iter()
            .map(|t| t.magnitude.iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        let (k, _) = mins.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((axis[k] - 2.9).abs() < 0.15, "min at {}", axis[k]);
        assert!(mins[0] > mins[k] && mins[65] > mins[k]);

        let constructive = sweep(&p, &DriveField::effective(0.0, 0.35 * PI), SweepAxis::Ratio, &axis, &g)
            .unwrap();
        let peaks: Vec<f64> = constructive.traces.iter().map(|t| t.magnitude[800]).collect();
        assert!(peaks.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn regime_examples() {
        assert_eq!(label(0.0, 0.0), RegimeLabel::Mit);
        assert_eq!(label(4.5, 0.35 * PI), RegimeLabel::Miamp);
        assert_eq!(label(5.7, 1.35 * PI), RegimeLabel::Fano);
        assert_eq!(label(1.2, 1.35 * PI), RegimeLabel::Miabs);
        assert_eq!(label(0.4, 1.35 * PI), RegimeLabel::Null);
    }

    #[test]
    fn classify_needs_span() {
        let p = device();
        let tr = trace(&p, &DriveField::default(), &DetuningGrid::new(-5.0, 5.0, 101).unwrap()).unwrap();
        assert!(classify_regime(&p, &tr, &RegimeThresholds::default()).is_err());
    }

    #[test]
    fn magnitude_only_trace() {
        let tr = SpectrumTrace::from_magnitude(vec![0.0, 1.0], vec![1.0, 0.5]).unwrap();
        assert!(!tr.phase_known);
        assert_eq!(tr.db[0], 0.0);
        assert!(SpectrumTrace::from_magnitude(vec![1.0, 0.0], vec![1.0, 0.5]).is_err());
    }
}
