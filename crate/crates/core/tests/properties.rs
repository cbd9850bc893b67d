use std::f64::consts::{PI, TAU};

use magpol::delay::{find_zero_reflection, group_delay, unwrap_phase, DelayMethod};
use magpol::model::{steady_state, transmission, DriveField, SystemParams};
use magpol::oracle::{oracle_transmission, IntegratorConfig};
use magpol::spectra::DetuningGrid;
use num_complex::Complex64;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = SystemParams> {
    (1.0..20.0, 20.0..200.0, 0.5..5.0, 0.05..1.0, 0.05..1.0, -5.0..5.0f64).prop_map(
        |(g, kc, km, ec, em, dm)| SystemParams {
            cavity_freq: 0.0,
            magnon_freq: dm,
            coupling_g: g,
            kappa_c: kc,
            kappa_m: km,
            kappa_c1: ec * kc,
            kappa_m1: em * km,
        },
    )
}

/// Independent transcription of the resonant transmission, `Δ_c = Δ_m = Δ`.
fn literal(p: &SystemParams, d: &DriveField, x: f64) -> Complex64 {
    let i = Complex64::i();
    let eta_c = p.kappa_c1 / p.kappa_c;
    let eta_m = p.kappa_m1 / p.kappa_m;
    let den = (i * x + p.kappa_c) * (i * x + p.kappa_m) + p.coupling_g * p.coupling_g;
    let probe = 1.0 - 2.0 * eta_c * p.kappa_c * (i * x + p.kappa_m) / den;
    let pump = i * p.coupling_g
        * (2.0 * eta_c * p.kappa_c).sqrt()
        * (2.0 * eta_m * p.kappa_m).sqrt()
        * d.ratio_delta
        * Complex64::from_polar(1.0, -(d.phase_phi + d.phase_offset))
        / den;
    probe + pump
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pump_term_is_linear(p in params(), delta in 0.0..5.0, phi in 0.0..TAU, x in -20.0..20.0) {
        let t0 = transmission(&p, &DriveField::new(0.0, phi), x).unwrap();
        let t1 = transmission(&p, &DriveField::new(delta, phi), x).unwrap();
        let t2 = transmission(&p, &DriveField::new(2.0 * delta, phi), x).unwrap();
        prop_assert!(((t2 - t0) - (t1 - t0) * 2.0).norm() < 1e-14 * (1.0 + t2.norm()));
    }

    #[test]
    fn phase_period(p in params(), delta in 0.0..5.0, phi in 0.0..TAU, x in -20.0..20.0) {
        let a = transmission(&p, &DriveField::new(delta, phi), x).unwrap();
        let b = transmission(&p, &DriveField::new(delta, phi + TAU), x).unwrap();
        prop_assert!((a - b).norm() < 1e-13);
    }

    #[test]
    fn resonant_reduction(p in params(), delta in 0.0..5.0, phi in 0.0..TAU, x in -20.0..20.0) {
        let p = SystemParams { magnon_freq: p.cavity_freq, ..p };
        let d = DriveField::new(delta, phi);
        let a = transmission(&p, &d, x).unwrap();
        let b = literal(&p, &d, x);
        prop_assert!((a - b).norm() <= 1e-14 * b.norm(), "{a} vs {b}");
    }

    #[test]
    fn passive_without_pump(p in params(), x in -500.0..500.0) {
        let t = transmission(&p, &DriveField::default(), x).unwrap();
        prop_assert!(t.norm() <= 1.0 + 1e-15);
    }

    #[test]
    fn phase_irrelevant_without_pump(p in params(), phi in 0.0..TAU, x in -20.0..20.0) {
        let a = transmission(&p, &DriveField::new(0.0, 0.0), x).unwrap();
        let b = transmission(&p, &DriveField::new(0.0, phi), x).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn far_detuned_baseline(p in params(), sign in prop::bool::ANY) {
        let x = if sign { 1e4 } else { -1e4 } * p.kappa_c;
        let t = transmission(&p, &DriveField::default(), x).unwrap();
        prop_assert!(t.norm() > 0.99);
    }

    #[test]
    fn steady_state_solves_the_mode_equations(p in params(), delta in 0.0..5.0, phi in 0.0..TAU, x in -20.0..20.0) {
        let d = DriveField::new(delta, phi);
        let a = steady_state(&p, &d, x).unwrap();
        let (dc, dm) = p.detunings(x);
        let i = Complex64::i();
        let pump = d.pump_phasor() * (p.magnon_port() * delta);
        let r1 = (i * dc + p.kappa_c) * a.cavity_amp + i * p.coupling_g * a.magnon_amp - p.cavity_port();
        let r2 = i * p.coupling_g * a.cavity_amp + (i * dm + p.kappa_m) * a.magnon_amp - pump;
        prop_assert!(r1.norm() < 1e-12 && r2.norm() < 1e-12);
    }

    #[test]
    fn unwrap_keeps_steps_small(raw in prop::collection::vec(-PI..PI, 2..200)) {
        let u = unwrap_phase(&raw);
        for w in u.windows(2) {
            prop_assert!(w[1] - w[0] > -PI - 1e-12 && w[1] - w[0] <= PI + 1e-12);
        }
        for (a, b) in u.iter().zip(&raw) {
            let k = (a - b) / TAU;
            prop_assert!((k - k.round()).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn oracle_matches_closed_form(p in params(), delta in 0.0..5.0, phi in 0.0..TAU, k in -3.0..3.0) {
        let x = k * p.narrow_width();
        let d = DriveField::new(delta, phi);
        let cfg = IntegratorConfig::for_system(&p, x, 1e-12);
        let a = transmission(&p, &d, x).unwrap();
        let b = oracle_transmission(&p, &d, x, &cfg).unwrap();
        prop_assert!((a - b).norm() < 1e-8 * a.norm(), "{a} vs {b}");
    }

    #[test]
    fn finite_difference_delay_agrees(p in params(), delta in 0.0..2.0, phi in 0.0..TAU) {
        let w = p.narrow_width();
        let d = DriveField::new(delta, phi);
        let coarse = DetuningGrid::centered(p.magnon_line_center(), 3.0 * w, w / 2000.0).unwrap();
        let probe = group_delay(&p, &d, &coarse, DelayMethod::Analytic).unwrap();
        let peak = probe.delay.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
        let step = (w / 4000.0).min(0.005 / (2.0 * PI * peak));
        let grid = DetuningGrid::centered(p.magnon_line_center(), 3.0 * w, step).unwrap();
        let an = group_delay(&p, &d, &grid, DelayMethod::Analytic).unwrap();
        let fd = group_delay(&p, &d, &grid, DelayMethod::FiniteDifference).unwrap();
        for i in 0..an.delay.len() {
            let scale = an.delay[i].abs().max(1e-3 * peak);
            prop_assert!((an.delay[i] - fd.delay[i]).abs() < 1e-4 * scale, "sample {i}");
        }
    }

    #[test]
    fn zero_reflection_is_a_zero(p in params(), phase in 0.0..TAU) {
        if let Some(z) = find_zero_reflection(&p, phase, 50.0) {
            let t = transmission(&p, &DriveField::effective(z.ratio_delta, phase), z.detuning).unwrap();
            prop_assert!(t.norm() < 1e-10);
            prop_assert!((0.0..=50.0).contains(&z.ratio_delta));
        }
    }
}

#[test]
fn delay_grows_with_grid_refinement_at_a_zero() {
    let p = SystemParams::resonant(7.6, 113.9, 1.2, 21.8, 0.6).unwrap();
    let z = find_zero_reflection(&p, 1.35 * PI, 100.0).unwrap();
    let drive = DriveField::effective(z.ratio_delta, 1.35 * PI);
    // grids that straddle the zero without landing on it
    let peak = |step: f64| {
        let grid = DetuningGrid::centered(z.detuning + 0.3 * step, 1.0, step).unwrap();
        let tr = group_delay(&p, &drive, &grid, DelayMethod::Analytic).unwrap();
        tr.delay.iter().filter(|t| t.is_finite()).fold(0.0_f64, |a, t| a.max(t.abs()))
    };
    let mut last = peak(0.02);
    for step in [0.01, 0.005, 0.0025] {
        let next = peak(step);
        assert!(next > last, "step {step}: {next} <= {last}");
        last = next;
    }
}
