//! TOML run configuration: `[system]`, `[drive]`, `[grid]`, optional `[fit]`.
//!
//! ```toml
//! [system]
//! coupling_g = 7.6
//! kappa_c = 113.9
//! kappa_m = 1.2
//! kappa_c1 = 21.8
//! kappa_m1 = 0.6
//!
//! [drive]
//! delta = 1.0
//! phi = "0.35pi"
//! ```

use std::f64::consts::PI;
use std::ops::Range;

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::fit::FitParam;
use crate::model::{DriveField, SystemParams};
use crate::spectra::DetuningGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemParams,
    pub drive: DriveField,
    pub grid: DetuningGrid,
    /// Free set requested under `[fit] free = [...]`, if any.
    pub fit_free: Option<Vec<FitParam>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: Option<Spanned<RawSystem>>,
    drive: Option<RawDrive>,
    grid: Option<RawGrid>,
    fit: Option<RawFit>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    cavity_freq: Option<Spanned<f64>>,
    magnon_freq: Option<Spanned<f64>>,
    coupling_g: Option<Spanned<f64>>,
    kappa_c: Option<Spanned<f64>>,
    kappa_m: Option<Spanned<f64>>,
    kappa_c1: Option<Spanned<f64>>,
    kappa_m1: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrive {
    delta: Option<Spanned<f64>>,
    phi: Option<Spanned<toml::Value>>,
    phase_offset: Option<Spanned<toml::Value>>,
    probe_amp: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    start: Option<Spanned<f64>>,
    stop: Option<Spanned<f64>>,
    count: Option<Spanned<i64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFit {
    free: Option<Spanned<Vec<String>>>,
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn config_err(text: &str, key: &str, span: Range<usize>, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        line: line_of(text, span.start),
        message: message.into(),
    }
}

/// Phase in radians from a number or a string such as `"1.35pi"`, `"pi"`, `"-0.5pi"`.
pub fn parse_phase(s: &str) -> Option<f64> {
    let s = s.trim();
    let lower = s.to_ascii_lowercase();
    let body = lower
        .strip_suffix("pi")
        .or_else(|| lower.strip_suffix('π'))
        .map(str::trim_end);
    match body {
        Some("") | Some("+") => Some(PI),
        Some("-") => Some(-PI),
        Some(b) => b.trim_end_matches('*').trim_end().parse::<f64>().ok().map(|v| v * PI),
        None => s.parse::<f64>().ok(),
    }
    .filter(|v| v.is_finite())
}

fn phase_value(text: &str, key: &str, v: &Spanned<toml::Value>) -> Result<f64> {
    let parsed = match v.get_ref() {
        toml::Value::Float(f) => Some(*f),
        toml::Value::Integer(i) => Some(*i as f64),
        toml::Value::String(s) => parse_phase(s),
        _ => None,
    };
    parsed.ok_or_else(|| {
        config_err(text, key, v.span(), "expected radians or a multiple of pi such as \"1.35pi\"")
    })
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
        Error::Config {
            key: String::new(),
            line,
            message: e.message().to_string(),
        }
    })?;

    let Some(system) = raw.system else {
        return Err(Error::Config {
            key: "system".into(),
            line: 1,
            message: "missing required section [system]".into(),
        });
    };
    let section_span = system.span();
    let sys = system.into_inner();
    let required = |key: &str, v: &Option<Spanned<f64>>| -> Result<f64> {
        v.as_ref()
            .map(|s| *s.get_ref())
            .ok_or_else(|| config_err(text, key, section_span.clone(), "missing required key"))
    };
    let cavity_freq = sys.cavity_freq.as_ref().map_or(0.0, |s| *s.get_ref());
    let params = SystemParams {
        cavity_freq,
        magnon_freq: sys.magnon_freq.as_ref().map_or(cavity_freq, |s| *s.get_ref()),
        coupling_g: required("coupling_g", &sys.coupling_g)?,
        kappa_c: required("kappa_c", &sys.kappa_c)?,
        kappa_m: required("kappa_m", &sys.kappa_m)?,
        kappa_c1: required("kappa_c1", &sys.kappa_c1)?,
        kappa_m1: required("kappa_m1", &sys.kappa_m1)?,
    };
    if let Err(Error::InvalidParameter { name, reason }) = params.validate() {
        let span = match name {
            "cavity_freq" => sys.cavity_freq.as_ref(),
            "magnon_freq" => sys.magnon_freq.as_ref(),
            "coupling_g" => sys.coupling_g.as_ref(),
            "kappa_c" => sys.kappa_c.as_ref(),
            "kappa_m" => sys.kappa_m.as_ref(),
            "kappa_c1" => sys.kappa_c1.as_ref(),
            "kappa_m1" => sys.kappa_m1.as_ref(),
            _ => None,
        }
        .map_or(section_span.clone(), |s| s.span());
        return Err(config_err(text, name, span, reason));
    }

    let mut drive = DriveField::default();
    if let Some(d) = &raw.drive {
        if let Some(v) = &d.delta {
            drive.ratio_delta = *v.get_ref();
        }
        if let Some(v) = &d.phi {
            drive.phase_phi = phase_value(text, "phi", v)?;
        }
        if let Some(v) = &d.phase_offset {
            drive.phase_offset = phase_value(text, "phase_offset", v)?;
        }
        if let Some(v) = &d.probe_amp {
            drive.probe_amp = *v.get_ref();
        }
        if let Err(Error::InvalidParameter { name, reason }) = drive.validate() {
            let span = match name {
                "delta" => d.delta.as_ref().map(|s| s.span()),
                "phi" => d.phi.as_ref().map(|s| s.span()),
                "phase_offset" => d.phase_offset.as_ref().map(|s| s.span()),
                "probe_amp" => d.probe_amp.as_ref().map(|s| s.span()),
                _ => None,
            }
            .unwrap_or(0..0);
            return Err(config_err(text, name, span, reason));
        }
    }

    let default_grid = DetuningGrid::default();
    let grid = match &raw.grid {
        None => default_grid,
        Some(g) => {
            let start = g.start.as_ref().map_or(default_grid.start(), |s| *s.get_ref());
            let stop = g.stop.as_ref().map_or(default_grid.stop(), |s| *s.get_ref());
            let count = match &g.count {
                None => default_grid.count(),
                Some(c) if *c.get_ref() >= 2 => *c.get_ref() as usize,
                Some(c) => return Err(config_err(text, "count", c.span(), "must be at least 2")),
            };
            DetuningGrid::new(start, stop, count).map_err(|e| {
                let span = g.stop.as_ref().or(g.start.as_ref()).map_or(0..0, |s| s.span());
                config_err(text, "stop", span, e.to_string())
            })?
        }
    };

    let fit_free = match raw.fit.and_then(|f| f.free) {
        None => None,
        Some(list) => {
            let span = list.span();
            let mut out = Vec::new();
            for name in list.into_inner() {
                let p = FitParam::parse(&name).ok_or_else(|| {
                    config_err(text, "free", span.clone(), format!("unknown fit parameter `{name}`"))
                })?;
                out.push(p);
            }
            Some(out)
        }
    };

    Ok(RunConfig {
        system: params,
        drive,
        grid,
        fit_free,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEVICE: &str = "[system]\ncoupling_g = 7.6\nkappa_c = 113.9\nkappa_m = 1.2\nkappa_c1 = 21.8\nkappa_m1 = 0.6\n";

    #[test]
    fn device_defaults() {
        let c = parse_config(DEVICE).unwrap();
        assert!((c.system.eta_c() - 0.1914).abs() < 5e-5);
        assert_eq!(c.system.eta_m(), 0.5);
        assert_eq!(c.drive, DriveField::default());
        assert_eq!(c.grid, DetuningGrid::default());
        assert_eq!(c.system.magnon_freq, 0.0);
        assert!(c.fit_free.is_none());
    }

    #[test]
    fn drive_and_grid() {
        let text = format!(
            "{DEVICE}\n[drive]\ndelta = 2\nphi = \"1.35pi\"\nphase_offset = 0\n\n[grid]\nstart = -5\nstop = 5\ncount = 11\n\n[fit]\nfree = [\"g\", \"kappa_c\"]\n"
        );
        let c = parse_config(&text).unwrap();
        assert_eq!(c.drive.ratio_delta, 2.0);
        assert!((c.drive.phase_phi - 1.35 * PI).abs() < 1e-15);
        assert_eq!(c.drive.phase_offset, 0.0);
        assert_eq!(c.grid.count(), 11);
        assert_eq!(c.fit_free, Some(vec![FitParam::G, FitParam::KappaC]));
    }

    #[test]
    fn kappa_c1_too_large() {
        let text = DEVICE.replace("kappa_c1 = 21.8", "kappa_c1 = 200");
        match parse_config(&text) {
            Err(Error::Config { key, line, .. }) => {
                assert_eq!(key, "kappa_c1");
                assert_eq!(line, 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_positive_rate() {
        let text = DEVICE.replace("kappa_m = 1.2", "kappa_m = 0");
        match parse_config(&text) {
            Err(Error::Config { key, line, .. }) => {
                assert_eq!(key, "kappa_m");
                assert_eq!(line, 4);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_key() {
        let text = DEVICE.replace("kappa_m1 = 0.6\n", "");
        match parse_config(&text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "kappa_m1"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("[drive]\ndelta = 1\n"), Err(Error::Config { .. })));
    }

    #[test]
    fn bad_phase_and_syntax() {
        let text = format!("{DEVICE}[drive]\nphi = \"abc\"\n");
        match parse_config(&text) {
            Err(Error::Config { key, line, .. }) => {
                assert_eq!(key, "phi");
                assert_eq!(line, 8);
            }
            other => panic!("{other:?}"),
        }
        match parse_config("[system]\ncoupling_g = = 1\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_config(&format!("{DEVICE}bogus = 1\n")).is_err());
    }

    #[test]
    fn phase_shorthand() {
        assert_eq!(parse_phase("pi"), Some(PI));
        assert_eq!(parse_phase("-pi"), Some(-PI));
        assert!((parse_phase("1.35pi").unwrap() - 1.35 * PI).abs() < 1e-15);
        assert!((parse_phase("0.5 π").unwrap() - 0.5 * PI).abs() < 1e-15);
        assert_eq!(parse_phase("2.5"), Some(2.5));
        assert_eq!(parse_phase("x"), None);
    }
}
