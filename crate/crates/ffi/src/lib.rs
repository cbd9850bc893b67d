//! C ABI over `magpol`.
//!
//! Every entry point returns a [`MagpolStatus`]; results come back through
//! out-pointers. On failure the message is kept per thread and can be read
//! with [`magpol_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use magpol::delay;
use magpol::model::{self, DriveField, SystemParams};
use magpol::spectra::{self, DetuningGrid, RegimeLabel, RegimeThresholds};
use magpol::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MagpolStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Domain = 3,
    Singular = 4,
    NoSolution = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MagpolRegime {
    Mit = 0,
    Miabs = 1,
    Miamp = 2,
    Fano = 3,
    Null = 4,
}

impl From<RegimeLabel> for MagpolRegime {
    fn from(l: RegimeLabel) -> Self {
        match l {
            RegimeLabel::Mit => MagpolRegime::Mit,
            RegimeLabel::Miabs => MagpolRegime::Miabs,
            RegimeLabel::Miamp => MagpolRegime::Miamp,
            RegimeLabel::Fano => MagpolRegime::Fano,
            RegimeLabel::Null => MagpolRegime::Null,
        }
    }
}

/// Opaque device + drive.
pub struct MagpolModel {
    params: SystemParams,
    drive: DriveField,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: MagpolStatus, msg: impl Into<String>) -> MagpolStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> MagpolStatus {
    match e {
        Error::InvalidParameter { .. } | Error::Config { .. } => MagpolStatus::InvalidParameter,
        Error::Singular(_) => MagpolStatus::Singular,
        _ => MagpolStatus::Domain,
    }
}

fn guard(f: impl FnOnce() -> Result<(), MagpolStatus>) -> MagpolStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MagpolStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(MagpolStatus::Panic, "internal panic"),
    }
}

fn check<T>(r: magpol::Result<T>) -> Result<T, MagpolStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn model_ref<'a>(m: *const MagpolModel) -> Result<&'a MagpolModel, MagpolStatus> {
    m.as_ref().ok_or_else(|| fail(MagpolStatus::NullPointer, "null model handle"))
}

fn non_null<T>(p: *mut T, what: &str) -> Result<(), MagpolStatus> {
    if p.is_null() {
        Err(fail(MagpolStatus::NullPointer, format!("null `{what}`")))
    } else {
        Ok(())
    }
}

/// Creates a model. Rates in MHz; `magnon_offset` is `ω_m − ω_c`.
/// The drive starts at zero pump with offset π. Free with [`magpol_model_free`].
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn magpol_model_new(
    coupling_g: f64,
    kappa_c: f64,
    kappa_m: f64,
    kappa_c1: f64,
    kappa_m1: f64,
    magnon_offset: f64,
    out: *mut *mut MagpolModel,
) -> MagpolStatus {
    guard(|| {
        non_null(out, "out")?;
        let params = SystemParams {
            cavity_freq: 0.0,
            magnon_freq: magnon_offset,
            coupling_g,
            kappa_c,
            kappa_m,
            kappa_c1,
            kappa_m1,
        };
        check(params.validate())?;
        *out = Box::into_raw(Box::new(MagpolModel {
            params,
            drive: DriveField::default(),
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`magpol_model_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn magpol_model_free(model: *mut MagpolModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Sets pump/probe ratio, relative phase and calibration offset (radians).
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn magpol_model_set_drive(
    model: *mut MagpolModel,
    ratio_delta: f64,
    phase_phi: f64,
    phase_offset: f64,
) -> MagpolStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| fail(MagpolStatus::NullPointer, "null model handle"))?;
        let drive = DriveField {
            ratio_delta,
            phase_phi,
            phase_offset,
            ..m.drive
        };
        check(drive.validate())?;
        m.drive = drive;
        Ok(())
    })
}

/// Complex transmission at probe detuning `detuning` (MHz).
///
/// # Safety
/// `model` must be a live handle; `re`, `im` writable.
#[no_mangle]
pub unsafe extern "C" fn magpol_transmission(
    model: *const MagpolModel,
    detuning: f64,
    re: *mut f64,
    im: *mut f64,
) -> MagpolStatus {
    guard(|| {
        let m = model_ref(model)?;
        non_null(re, "re")?;
        non_null(im, "im")?;
        let t = check(model::transmission(&m.params, &m.drive, detuning))?;
        *re = t.re;
        *im = t.im;
        Ok(())
    })
}

/// `|t|` on `count` evenly spaced detunings from `start` to `stop`.
///
/// # Safety
/// `model` must be a live handle; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn magpol_magnitude_trace(
    model: *const MagpolModel,
    start: f64,
    stop: f64,
    count: usize,
    out: *mut f64,
    out_len: usize,
) -> MagpolStatus {
    guard(|| {
        let m = model_ref(model)?;
        non_null(out, "out")?;
        if out_len < count {
            return Err(fail(
                MagpolStatus::BufferTooSmall,
                format!("buffer holds {out_len}, need {count}"),
            ));
        }
        let grid = check(DetuningGrid::new(start, stop, count))?;
        let tr = check(spectra::trace(&m.params, &m.drive, &grid))?;
        std::slice::from_raw_parts_mut(out, count).copy_from_slice(&tr.magnitude);
        Ok(())
    })
}

/// Group delay in µs at one detuning.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn magpol_group_delay(
    model: *const MagpolModel,
    detuning: f64,
    out: *mut f64,
) -> MagpolStatus {
    guard(|| {
        let m = model_ref(model)?;
        non_null(out, "out")?;
        *out = check(delay::delay_at(&m.params, &m.drive, detuning))?;
        Ok(())
    })
}

/// Smallest ratio in `[0, max_ratio]` with vanishing reflection at effective
/// phase `phase_eff`; `NoSolution` if there is none. Ignores the stored drive.
///
/// # Safety
/// `model` must be a live handle; `ratio_delta`, `detuning` writable.
#[no_mangle]
pub unsafe extern "C" fn magpol_find_zero_reflection(
    model: *const MagpolModel,
    phase_eff: f64,
    max_ratio: f64,
    ratio_delta: *mut f64,
    detuning: *mut f64,
) -> MagpolStatus {
    guard(|| {
        let m = model_ref(model)?;
        non_null(ratio_delta, "ratio_delta")?;
        non_null(detuning, "detuning")?;
        let z = delay::find_zero_reflection(&m.params, phase_eff, max_ratio).ok_or_else(|| {
            fail(
                MagpolStatus::NoSolution,
                format!("no zero-reflection point with delta in [0, {max_ratio}]"),
            )
        })?;
        *ratio_delta = z.ratio_delta;
        *detuning = z.detuning;
        Ok(())
    })
}

/// Regime of the current drive, judged on a grid wide enough to show the baseline.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn magpol_classify(model: *const MagpolModel, out: *mut MagpolRegime) -> MagpolStatus {
    guard(|| {
        let m = model_ref(model)?;
        non_null(out, "out")?;
        let grid = check(DetuningGrid::wide(&m.params))?;
        let tr = check(spectra::trace(&m.params, &m.drive, &grid))?;
        let label = check(spectra::classify_regime(&m.params, &tr, &RegimeThresholds::default()))?;
        *out = label.into();
        Ok(())
    })
}

/// Message of the last failed call on this thread, `""` after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn magpol_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn magpol_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
