//! Command-line front end. Exit codes: 0 success, 1 domain/runtime error,
//! 2 usage error. Data goes to stdout or `--out`, diagnostics to stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::delay::{self, DelayMethod};
use crate::error::{Error, Result};
use crate::fit::{self, FitParam, FitProblem, ModelState, Observation};
use crate::io::export;
use crate::io::trace_file::{self, DriveMetadata, TraceFormat};
use crate::io::{parse_config, parse_phase, RunConfig};
use crate::model::{transmission, DriveField};
use crate::oracle::{oracle_transmission, IntegratorConfig};
use crate::spectra::{self, DetuningGrid, RegimeThresholds, SweepAxis};

#[derive(Parser, Debug)]
#[command(name = "magpol", version, about = "Two-tone driven cavity-magnon transmission")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the pump/probe ratio.
    #[arg(long)]
    delta: Option<f64>,
    /// Override the relative pump phase (radians or e.g. `0.35pi`).
    #[arg(long, value_parser = phase_arg, allow_hyphen_values = true)]
    phi: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transmission trace on the configured grid.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Output file; `.s1p` selects Touchstone, anything else CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectra swept over the pump phase or the pump/probe ratio (long CSV).
    Map {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = AxisArg::Phase)]
        axis: AxisArg,
        #[arg(long, default_value_t = 101)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Unwrapped phase and group delay, or extremal delay versus ratio.
    Delay {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = MethodArg::Analytic)]
        method: MethodArg,
        /// Scan the ratio from 0 to this value and report the extremal delay.
        #[arg(long)]
        ratio_max: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        ratio_step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pump ratio and detuning at which the reflection vanishes.
    Zero {
        #[arg(long)]
        config: PathBuf,
        /// Effective pump phase φ + φ₀.
        #[arg(long, value_parser = phase_arg, allow_hyphen_values = true)]
        phase_eff: f64,
        #[arg(long, default_value_t = 100.0)]
        max_ratio: f64,
    },
    /// Interference regime label of the configured drive.
    Classify {
        #[command(flatten)]
        common: Common,
    },
    /// Fit device parameters to one or more trace files.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Trace files (CSV or .s1p); drive taken from file metadata, else the config.
        #[arg(long = "trace", required = true, num_args = 1..)]
        traces: Vec<PathBuf>,
        /// Comma-separated free set, e.g. `g,kappa_c,kappa_m`.
        #[arg(long, value_delimiter = ',')]
        free: Option<Vec<String>>,
        /// Hold amplitude scale and phase slope fixed (synthetic data).
        #[arg(long)]
        no_background: bool,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        residuals: Option<PathBuf>,
    },
    /// Compare the closed form with time-domain integration on the grid.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 11)]
        points: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AxisArg {
    Phase,
    Ratio,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Analytic,
    Fd,
}

fn phase_arg(s: &str) -> std::result::Result<f64, String> {
    parse_phase(s).ok_or_else(|| format!("`{s}` is not a phase (radians or e.g. 1.35pi)"))
}

/// Parses `argv` (including the program name) and runs the command.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = load_config(&common.config)?;
    if let Some(d) = common.delta {
        cfg.drive.ratio_delta = d;
    }
    if let Some(p) = common.phi {
        cfg.drive.phase_phi = p;
    }
    cfg.drive.validate()?;
    Ok(cfg)
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn metadata(drive: &DriveField) -> DriveMetadata {
    DriveMetadata {
        ratio_delta: Some(drive.ratio_delta),
        phase_phi: Some(drive.phase_phi),
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Spectrum { common, out: path } => {
            let cfg = load(&common)?;
            let tr = spectra::trace(&cfg.system, &cfg.drive, &cfg.grid)?;
            let meta = metadata(&cfg.drive);
            match path {
                Some(p) => trace_file::write_trace(
                    &tr,
                    TraceFormat::from_path(&p),
                    &p,
                    cfg.system.cavity_freq,
                    &meta,
                ),
                None => emit(out, None, &trace_file::render_csv(&tr, &meta)),
            }
        }
        Command::Map {
            common,
            axis,
            count,
            out: path,
        } => {
            let cfg = load(&common)?;
            if count < 2 {
                return Err(Error::invalid("count", "need at least 2 axis values"));
            }
            let axis = match axis {
                AxisArg::Phase => SweepAxis::Phase,
                AxisArg::Ratio => SweepAxis::Ratio,
            };
            let values = axis.default_values(count);
            let map = spectra::sweep(&cfg.system, &cfg.drive, axis, &values, &cfg.grid)?;
            emit(out, path.as_deref(), &export::sweep_csv(&map))
        }
        Command::Delay {
            common,
            method,
            ratio_max,
            ratio_step,
            out: path,
        } => {
            let cfg = load(&common)?;
            if let Some(max) = ratio_max {
                if !(ratio_step > 0.0 && max > 0.0) {
                    return Err(Error::invalid("ratio_step", "ratio range must be positive"));
                }
                let n = (max / ratio_step).round() as usize;
                let axis: Vec<f64> = (0..=n).map(|i| i as f64 * ratio_step).collect();
                let curve = delay::delay_extremum_vs_ratio(
                    &cfg.system,
                    cfg.drive.effective_phase(),
                    &axis,
                    &cfg.grid,
                )?;
                return emit(out, path.as_deref(), &export::delay_extremum_csv(&curve));
            }
            let method = match method {
                MethodArg::Analytic => DelayMethod::Analytic,
                MethodArg::Fd => DelayMethod::FiniteDifference,
            };
            let tr = delay::group_delay(&cfg.system, &cfg.drive, &cfg.grid, method)?;
            emit(out, path.as_deref(), &export::delay_csv(&tr))
        }
        Command::Zero {
            config,
            phase_eff,
            max_ratio,
        } => {
            let cfg = load_config(&config)?;
            match delay::find_zero_reflection(&cfg.system, phase_eff, max_ratio) {
                Some(z) => emit(
                    out,
                    None,
                    &format!(
                        "delta_star: {}\ndetuning_mhz: {}\nresidual: {:e}\n",
                        z.ratio_delta, z.detuning, z.residual
                    ),
                ),
                None => Err(Error::Domain(format!(
                    "no zero-reflection point with delta in [0, {max_ratio}]"
                ))),
            }
        }
        Command::Classify { common } => {
            let cfg = load(&common)?;
            let grid = DetuningGrid::wide(&cfg.system)?;
            let tr = spectra::trace(&cfg.system, &cfg.drive, &grid)?;
            let label = spectra::classify_regime(&cfg.system, &tr, &RegimeThresholds::default())?;
            emit(out, None, &format!("{label}\n"))
        }
        Command::Fit {
            config,
            traces,
            free,
            no_background,
            report,
            residuals,
        } => {
            let cfg = load_config(&config)?;
            let mut observations = Vec::new();
            for path in &traces {
                let (file, tr) = trace_file::read_trace(path, cfg.system.cavity_freq)?;
                let mut drive = cfg.drive;
                if let Some(d) = file.metadata.ratio_delta {
                    drive.ratio_delta = d;
                }
                if let Some(p) = file.metadata.phase_phi {
                    drive.phase_phi = p;
                }
                observations.push(Observation { trace: tr, drive });
            }
            let free: Vec<FitParam> = match free.or_else(|| {
                cfg.fit_free
                    .as_ref()
                    .map(|v| v.iter().map(|p| p.name().to_string()).collect())
            }) {
                Some(names) => names
                    .iter()
                    .map(|n| {
                        FitParam::parse(n)
                            .ok_or_else(|| Error::Domain(format!("unknown fit parameter `{n}`")))
                    })
                    .collect::<Result<_>>()?,
                None => vec![FitParam::G, FitParam::KappaC, FitParam::KappaM, FitParam::KappaC1],
            };
            let guess = ModelState::new(cfg.system, cfg.drive.phase_offset);
            let problem = if no_background {
                FitProblem::new(observations, guess, &free)?
            } else {
                FitProblem::measured(observations, guess, &free)?
            };
            let result = fit::fit_parameters(&problem)?;
            emit(out, report.as_deref(), &export::fit_report(&result))?;
            if let Some(p) = residuals {
                emit(out, Some(&p), &export::residual_csv(&problem, &result))?;
            }
            Ok(())
        }
        Command::OracleCheck { common, points, tol } => {
            let cfg = load(&common)?;
            if points < 2 {
                return Err(Error::invalid("points", "need at least 2"));
            }
            let grid = DetuningGrid::new(cfg.grid.start(), cfg.grid.stop(), points)?;
            let mut worst = 0.0_f64;
            for x in grid.values() {
                let icfg = IntegratorConfig::for_system(&cfg.system, x, 1e-12);
                let a = transmission(&cfg.system, &cfg.drive, x)?;
                let b = oracle_transmission(&cfg.system, &cfg.drive, x, &icfg)?;
                worst = worst.max((a - b).norm() / a.norm().max(1e-300));
            }
            emit(out, None, &format!("max_relative_difference: {worst:e}\n"))?;
            if worst > tol {
                return Err(Error::Domain(format!(
                    "closed form and integration differ by {worst:e} (> {tol:e})"
                )));
            }
            Ok(())
        }
    }
}
