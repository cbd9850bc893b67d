//! Trace files: Touchstone v1 one-port (`.s1p`) and plain CSV.
//!
//! Files store absolute frequencies (Touchstone) or detunings (CSV). Detuning
//! is `ω_c − f`, so rows sorted by increasing frequency come out in reverse
//! detuning order; traces are always returned with increasing detuning.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io::config::parse_phase;
use crate::spectra::SpectrumTrace;

pub const CSV_HEADER: &str = "detuning_mhz,re,im,magnitude,db";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    TouchstoneS1P,
    Csv,
}

impl TraceFormat {
    /// `.s1p` (any case) is Touchstone, everything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("s1p") => TraceFormat::TouchstoneS1P,
            _ => TraceFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreqUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FreqUnit {
    pub fn to_mhz(self) -> f64 {
        match self {
            FreqUnit::Hz => 1e-6,
            FreqUnit::KHz => 1e-3,
            FreqUnit::MHz => 1.0,
            FreqUnit::GHz => 1e3,
        }
    }

    fn parse(token: &str) -> Option<Self> {
        match token.to_ascii_uppercase().as_str() {
            "HZ" => Some(FreqUnit::Hz),
            "KHZ" => Some(FreqUnit::KHz),
            "MHZ" => Some(FreqUnit::MHz),
            "GHZ" => Some(FreqUnit::GHz),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataLayout {
    RealImag,
    DbAngle,
    MagAngle,
    /// CSV without `re`/`im` values.
    MagnitudeOnly,
}

/// Drive settings recorded alongside a trace.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DriveMetadata {
    pub ratio_delta: Option<f64>,
    pub phase_phi: Option<f64>,
}

impl DriveMetadata {
    pub fn is_empty(&self) -> bool {
        self.ratio_delta.is_none() && self.phase_phi.is_none()
    }

    /// Picks up `delta = …` / `phi = …` from a comment body.
    fn absorb(&mut self, comment: &str) {
        let Some((key, value)) = comment.split_once('=') else { return };
        match key.trim().to_ascii_lowercase().as_str() {
            "delta" => self.ratio_delta = value.trim().parse().ok().or(self.ratio_delta),
            "phi" => self.phase_phi = parse_phase(value).or(self.phase_phi),
            _ => {}
        }
    }

    fn lines(&self, prefix: char) -> String {
        let mut s = String::new();
        if let Some(d) = self.ratio_delta {
            s.push_str(&format!("{prefix} delta = {d}\n"));
        }
        if let Some(p) = self.phase_phi {
            s.push_str(&format!("{prefix} phi = {p}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub format: TraceFormat,
    pub unit: FreqUnit,
    pub layout: DataLayout,
    pub reference_impedance: f64,
    pub metadata: DriveMetadata,
}

fn parse_err(label: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: label.to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a trace; `cavity_freq` (MHz) converts Touchstone frequencies to detuning.
pub fn read_trace(path: &Path, cavity_freq: f64) -> Result<(TraceFile, SpectrumTrace)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let label = path.display().to_string();
    match TraceFormat::from_path(path) {
        TraceFormat::TouchstoneS1P => parse_touchstone(&text, cavity_freq, &label),
        TraceFormat::Csv => parse_csv(&text, &label),
    }
}

struct OptionLine {
    unit: FreqUnit,
    layout: DataLayout,
    z0: f64,
}

fn parse_option_line(body: &str, label: &str, line: usize) -> Result<OptionLine> {
    // Touchstone defaults when a token is omitted.
    let mut opt = OptionLine {
        unit: FreqUnit::GHz,
        layout: DataLayout::MagAngle,
        z0: 50.0,
    };
    let mut tokens = body.split_whitespace();
    while let Some(tok) = tokens.next() {
        if let Some(u) = FreqUnit::parse(tok) {
            opt.unit = u;
            continue;
        }
        match tok.to_ascii_uppercase().as_str() {
            "S" => {}
            "Y" | "Z" | "G" | "H" => {
                return Err(parse_err(label, line, format!("unsupported parameter type `{tok}`")))
            }
            "RI" => opt.layout = DataLayout::RealImag,
            "DB" => opt.layout = DataLayout::DbAngle,
            "MA" => opt.layout = DataLayout::MagAngle,
            "R" => {
                let z = tokens.next().and_then(|v| v.parse::<f64>().ok());
                match z {
                    Some(z) if z > 0.0 => opt.z0 = z,
                    _ => return Err(parse_err(label, line, "option `R` needs a positive impedance")),
                }
            }
            _ => return Err(parse_err(label, line, format!("malformed option line: unknown token `{tok}`"))),
        }
    }
    Ok(opt)
}

pub fn parse_touchstone(text: &str, cavity_freq: f64, label: &str) -> Result<(TraceFile, SpectrumTrace)> {
    let mut option: Option<(OptionLine, usize)> = None;
    let mut metadata = DriveMetadata::default();
    let mut rows: Vec<(f64, Complex64)> = Vec::new();
    let mut last_freq: Option<(f64, usize)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let (data, comment) = match raw.split_once('!') {
            Some((d, c)) => (d, Some(c)),
            None => (raw, None),
        };
        if let Some(c) = comment {
            metadata.absorb(c);
        }
        let data = data.trim();
        if data.is_empty() {
            continue;
        }
        if let Some(body) = data.strip_prefix('#') {
            let parsed = parse_option_line(body, label, line)?;
            if let Some((first, _)) = &option {
                if first.layout != parsed.layout || first.unit != parsed.unit {
                    return Err(parse_err(label, line, "mixed layouts: second option line disagrees with the first"));
                }
            }
            if !rows.is_empty() && option.is_none() {
                return Err(parse_err(label, line, "option line must precede data"));
            }
            option.get_or_insert((parsed, line));
            continue;
        }
        let Some((opt, _)) = &option else {
            return Err(parse_err(label, line, "data before option line"));
        };
        let fields: Vec<f64> = data
            .split_whitespace()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(label, line, "non-numeric field"))?;
        if fields.len() != 3 {
            return Err(parse_err(
                label,
                line,
                format!("one-port data needs 3 columns, found {}", fields.len()),
            ));
        }
        let freq = fields[0] * opt.unit.to_mhz();
        if let Some((prev, _)) = last_freq {
            if !(freq > prev) {
                return Err(parse_err(label, line, "frequencies must be strictly increasing"));
            }
        }
        last_freq = Some((freq, line));
        let (a, b) = (fields[1], fields[2]);
        let z = match opt.layout {
            DataLayout::RealImag => Complex64::new(a, b),
            DataLayout::DbAngle => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
            DataLayout::MagAngle => Complex64::from_polar(a, b.to_radians()),
            DataLayout::MagnitudeOnly => unreachable!("not a Touchstone layout"),
        };
        rows.push((freq, z));
    }

    let Some((opt, _)) = option else {
        return Err(parse_err(label, text.lines().count().max(1), "missing option line"));
    };
    if rows.is_empty() {
        return Err(parse_err(label, text.lines().count().max(1), "no data rows"));
    }
    rows.reverse();
    let detuning = rows.iter().map(|(f, _)| cavity_freq - f).collect();
    let t = rows.iter().map(|(_, z)| *z).collect();
    let trace = SpectrumTrace::from_complex(detuning, t)
        .map_err(|e| parse_err(label, 0, e.to_string()))?;
    Ok((
        TraceFile {
            format: TraceFormat::TouchstoneS1P,
            unit: opt.unit,
            layout: opt.layout,
            reference_impedance: opt.z0,
            metadata,
        },
        trace,
    ))
}

pub fn parse_csv(text: &str, label: &str) -> Result<(TraceFile, SpectrumTrace)> {
    let mut metadata = DriveMetadata::default();
    for l in text.lines() {
        match l.trim_start().strip_prefix('#') {
            Some(c) => metadata.absorb(c),
            None => break,
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header_line = text
        .lines()
        .position(|l| !l.trim_start().starts_with('#'))
        .map_or(1, |i| i + 1);
    let headers = reader
        .headers()
        .map_err(|e| parse_err(label, header_line, e.to_string()))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let det_col = column("detuning_mhz")
        .ok_or_else(|| parse_err(label, header_line, format!("header must be `{CSV_HEADER}`")))?;
    let (re_col, im_col, mag_col) = (column("re"), column("im"), column("magnitude"));
    if mag_col.is_none() && (re_col.is_none() || im_col.is_none()) {
        return Err(parse_err(label, header_line, "need re/im or magnitude columns"));
    }

    let mut detuning = Vec::new();
    let mut t = Vec::new();
    let mut magnitude = Vec::new();
    let mut complex_rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(label, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |col: Option<usize>| -> Result<Option<f64>> {
            match col.and_then(|c| record.get(c)) {
                None | Some("") => Ok(None),
                Some(s) => s
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| parse_err(label, line, format!("not a number: `{s}`"))),
            }
        };
        let x = field(Some(det_col))?.ok_or_else(|| parse_err(label, line, "missing detuning"))?;
        if let Some(&prev) = detuning.last() {
            if !(x > prev) {
                return Err(parse_err(label, line, "detuning must be strictly increasing"));
            }
        }
        detuning.push(x);
        match (field(re_col)?, field(im_col)?) {
            (Some(re), Some(im)) => {
                complex_rows += 1;
                t.push(Complex64::new(re, im));
            }
            (None, None) => {
                let m = field(mag_col)?.ok_or_else(|| parse_err(label, line, "row has no data"))?;
                magnitude.push(m);
            }
            _ => return Err(parse_err(label, line, "row has only one of re/im")),
        }
    }
    if detuning.is_empty() {
        return Err(parse_err(label, header_line, "no data rows"));
    }
    let (layout, trace) = if complex_rows == detuning.len() {
        (DataLayout::RealImag, SpectrumTrace::from_complex(detuning, t)?)
    } else if complex_rows == 0 {
        (DataLayout::MagnitudeOnly, SpectrumTrace::from_magnitude(detuning, magnitude)?)
    } else {
        return Err(parse_err(label, header_line, "mixed layouts: some rows lack re/im"));
    };
    Ok((
        TraceFile {
            format: TraceFormat::Csv,
            unit: FreqUnit::MHz,
            layout,
            reference_impedance: 50.0,
            metadata,
        },
        trace,
    ))
}

pub fn render_csv(trace: &SpectrumTrace, metadata: &DriveMetadata) -> String {
    let mut out = metadata.lines('#');
    out.push_str(CSV_HEADER);
    out.push('\n');
    for i in 0..trace.len() {
        let (re, im) = if trace.phase_known {
            (trace.t[i].re.to_string(), trace.t[i].im.to_string())
        } else {
            (String::new(), String::new())
        };
        out.push_str(&format!(
            "{},{re},{im},{},{}\n",
            trace.detuning[i], trace.magnitude[i], trace.db[i]
        ));
    }
    out
}

/// RI layout, Hz, rows in increasing frequency.
pub fn render_touchstone(trace: &SpectrumTrace, cavity_freq: f64, metadata: &DriveMetadata) -> String {
    let mut out = String::from("! one-port reflection\n");
    out.push_str(&metadata.lines('!'));
    out.push_str("# HZ S RI R 50\n");
    for i in (0..trace.len()).rev() {
        let hz = (cavity_freq - trace.detuning[i]) * 1e6;
        out.push_str(&format!("{hz} {} {}\n", trace.t[i].re, trace.t[i].im));
    }
    out
}

pub fn write_trace(
    trace: &SpectrumTrace,
    format: TraceFormat,
    path: &Path,
    cavity_freq: f64,
    metadata: &DriveMetadata,
) -> Result<()> {
    let text = match format {
        TraceFormat::Csv => render_csv(trace, metadata),
        TraceFormat::TouchstoneS1P => {
            if !trace.phase_known {
                return Err(Error::Domain("Touchstone output needs phase data".into()));
            }
            render_touchstone(trace, cavity_freq, metadata)
        }
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
