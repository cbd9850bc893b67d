use std::ffi::CStr;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use magpol_ffi::*;

fn device() -> *mut MagpolModel {
    let mut m = ptr::null_mut();
    let s = unsafe { magpol_model_new(7.6, 113.9, 1.2, 21.8, 0.6, 0.0, &mut m) };
    assert_eq!(s, MagpolStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(magpol_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn transmission_matches_core() {
    let m = device();
    unsafe {
        assert_eq!(magpol_model_set_drive(m, 1.5, 0.35 * PI, PI), MagpolStatus::Ok);
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(magpol_transmission(m, 0.7, &mut re, &mut im), MagpolStatus::Ok);
        let p = magpol::SystemParams::resonant(7.6, 113.9, 1.2, 21.8, 0.6).unwrap();
        let t = magpol::transmission(&p, &magpol::DriveField::new(1.5, 0.35 * PI), 0.7).unwrap();
        assert_eq!((re, im), (t.re, t.im));
        magpol_model_free(m);
    }
}

#[test]
fn invalid_parameters_are_reported() {
    let mut m = ptr::null_mut();
    let s = unsafe { magpol_model_new(7.6, 113.9, 1.2, 200.0, 0.6, 0.0, &mut m) };
    assert_eq!(s, MagpolStatus::InvalidParameter);
    assert!(m.is_null());
    assert!(last_error().contains("kappa_c1"), "{}", last_error());
}

#[test]
fn null_pointers_are_rejected() {
    let m = device();
    unsafe {
        let mut re = 0.0;
        assert_eq!(magpol_transmission(ptr::null(), 0.0, &mut re, &mut re), MagpolStatus::NullPointer);
        assert_eq!(magpol_transmission(m, 0.0, ptr::null_mut(), &mut re), MagpolStatus::NullPointer);
        assert_eq!(magpol_model_new(1.0, 1.0, 1.0, 0.5, 0.5, 0.0, ptr::null_mut()), MagpolStatus::NullPointer);
        magpol_model_free(ptr::null_mut());
        magpol_model_free(m);
    }
}

#[test]
fn magnitude_trace_and_buffer_size() {
    let m = device();
    let mut buf = [0.0; 5];
    unsafe {
        assert_eq!(magpol_magnitude_trace(m, -1.0, 1.0, 6, buf.as_mut_ptr(), buf.len()), MagpolStatus::BufferTooSmall);
        assert_eq!(magpol_magnitude_trace(m, -1.0, 1.0, 5, buf.as_mut_ptr(), buf.len()), MagpolStatus::Ok);
        assert!(last_error().is_empty());
        let (mut re, mut im) = (0.0, 0.0);
        magpol_transmission(m, 0.5, &mut re, &mut im);
        assert_eq!(buf[3], re.hypot(im));
        magpol_model_free(m);
    }
}

#[test]
fn zero_reflection_and_delay() {
    let m = device();
    unsafe {
        let (mut d, mut x) = (0.0, 0.0);
        assert_eq!(magpol_find_zero_reflection(m, 1.35 * PI, 100.0, &mut d, &mut x), MagpolStatus::Ok);
        assert!((d - 2.8808843).abs() < 1e-6 && (x - 1.0055739).abs() < 1e-6);
        assert_eq!(magpol_find_zero_reflection(m, 0.35 * PI, 100.0, &mut d, &mut x), MagpolStatus::NoSolution);
        assert!(!last_error().is_empty());

        let mut tau = 0.0;
        assert_eq!(magpol_group_delay(m, 0.0, &mut tau), MagpolStatus::Ok);
        assert!((tau - 0.0141426).abs() < 1e-6, "{tau}");
        magpol_model_free(m);
    }
}

#[test]
fn classify_without_pump_is_transparency() {
    let m = device();
    let mut label = MagpolRegime::Null;
    unsafe {
        assert_eq!(magpol_classify(m, &mut label), MagpolStatus::Ok);
        magpol_model_free(m);
    }
    assert_eq!(label, MagpolRegime::Mit);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(magpol_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// Compiles and runs a small C program against the generated header and the static library.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test-exe>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libmagpol_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = std::env::temp_dir().join(format!("magpol-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "magpol.h"
int main(void) {
    MagpolModel *m = NULL;
    if (magpol_model_new(7.6, 113.9, 1.2, 21.8, 0.6, 0.0, &m) != MAGPOL_STATUS_OK) return 2;
    double re, im;
    if (magpol_transmission(m, 0.0, &re, &im) != MAGPOL_STATUS_OK) return 3;
    if (magpol_transmission(NULL, 0.0, &re, &im) != MAGPOL_STATUS_NULL_POINTER) return 4;
    printf("%.6f %s\n", re, magpol_last_error_message());
    magpol_model_free(m);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    let _ = std::fs::remove_dir_all(&dir);
    assert!(out.status.success(), "{:?}", out);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.730920 null model handle");
}
