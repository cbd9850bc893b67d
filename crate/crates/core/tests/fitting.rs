use std::f64::consts::PI;

use magpol::fit::{
    fit_parameters, residual, synthesize_trace, Background, FitParam, FitProblem, ModelState,
    NoiseModel, Observation,
};
use magpol::model::{DriveField, SystemParams};
use magpol::spectra::{trace, DetuningGrid, SpectrumTrace};
use num_complex::Complex64;

fn device() -> SystemParams {
    SystemParams::resonant(7.6, 113.9, 1.2, 21.8, 0.6).unwrap()
}

const DEFAULT_FREE: [FitParam; 4] = [FitParam::G, FitParam::KappaC, FitParam::KappaM, FitParam::KappaC1];

fn observations(p: &SystemParams, grid: &DetuningGrid, sigma: f64, seed: u64) -> Vec<Observation> {
    [0.0, 1.0, 2.0]
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let drive = DriveField::new(r, 0.35 * PI);
            Observation {
                trace: synthesize_trace(p, &drive, grid, &NoiseModel::gaussian(sigma, seed + k as u64)).unwrap(),
                drive,
            }
        })
        .collect()
}

fn perturbed(p: &SystemParams, signs: [f64; 4]) -> ModelState {
    let mut s = ModelState::new(*p, PI);
    s.system.coupling_g *= 1.0 + 0.2 * signs[0];
    s.system.kappa_c *= 1.0 + 0.2 * signs[1];
    s.system.kappa_m *= 1.0 + 0.2 * signs[2];
    s.system.kappa_c1 *= 1.0 + 0.2 * signs[3];
    s
}

#[test]
fn noiseless_round_trip_from_every_corner() {
    let p = device();
    let obs = observations(&p, &DetuningGrid::default(), 0.0, 0);
    for corner in 0..16u32 {
        let signs: [f64; 4] = std::array::from_fn(|k| if corner >> k & 1 == 1 { 1.0 } else { -1.0 });
        let guess = perturbed(&p, signs);
        let fit = fit_parameters(&FitProblem::new(obs.clone(), guess, &DEFAULT_FREE).unwrap()).unwrap();
        assert!(fit.converged, "corner {corner}: {fit:?}");
        assert!(fit.residual_norm < 1e-10, "corner {corner}: {}", fit.residual_norm);
        for (q, truth) in [(FitParam::G, 7.6), (FitParam::KappaC, 113.9), (FitParam::KappaM, 1.2), (FitParam::KappaC1, 21.8)] {
            assert!((fit.value(q) / truth - 1.0).abs() < 1e-6, "corner {corner} {q}");
        }
    }
}

#[test]
fn noisy_recovery_within_two_percent() {
    let p = device();
    let guess = perturbed(&p, [1.0, -1.0, 1.0, -1.0]);
    for seed in [11, 12, 13] {
        let obs = observations(&p, &DetuningGrid::default(), 0.01, seed * 7);
        let fit = fit_parameters(&FitProblem::new(obs, guess, &DEFAULT_FREE).unwrap()).unwrap();
        assert!(fit.converged);
        assert!((fit.value(FitParam::G) / 7.6 - 1.0).abs() < 0.02);
        assert!((fit.value(FitParam::KappaC) / 113.9 - 1.0).abs() < 0.02);
        assert!((fit.value(FitParam::KappaM) / 1.2 - 1.0).abs() < 0.02);
        // standard errors of the right order for σ = 0.01
        let se = fit.std_error(FitParam::G).unwrap();
        assert!(se > 1e-4 && se < 0.2, "{se}");
    }
}

#[test]
fn scale_equivariance() {
    let p = device();
    let base_grid = DetuningGrid::default();
    let s = 3.0;
    let scaled = p.scaled(s);
    let grid = DetuningGrid::new(base_grid.start() * s, base_grid.stop() * s, base_grid.count()).unwrap();
    let guess = |q: &SystemParams| perturbed(q, [1.0, 1.0, -1.0, -1.0]);

    let fit_a = fit_parameters(&FitProblem::new(observations(&p, &base_grid, 0.0, 0), guess(&p), &DEFAULT_FREE).unwrap()).unwrap();
    let fit_b = fit_parameters(&FitProblem::new(observations(&scaled, &grid, 0.0, 0), guess(&scaled), &DEFAULT_FREE).unwrap()).unwrap();
    for q in DEFAULT_FREE {
        let a = fit_a.value(q) * s;
        let b = fit_b.value(q);
        assert!((a - b).abs() < 1e-8 * b.abs(), "{q}: {a} vs {b}");
    }
}

#[test]
fn measured_background_is_recovered() {
    let p = device();
    let grid = DetuningGrid::default();
    let (scale, slope) = (0.8, 0.02);
    let obs: Vec<Observation> = [0.5, 1.5]
        .iter()
        .map(|&r| {
            let drive = DriveField::new(r, 0.35 * PI);
            let clean = trace(&p, &drive, &grid).unwrap();
            let t = clean
                .t
                .iter()
                .zip(&clean.detuning)
                .map(|(z, &x)| z * Complex64::from_polar(scale, slope * x))
                .collect();
            Observation {
                trace: SpectrumTrace::from_complex(clean.detuning.clone(), t).unwrap(),
                drive,
            }
        })
        .collect();
    let guess = perturbed(&p, [1.0, -1.0, -1.0, 1.0]);
    let problem = FitProblem::measured(obs, guess, &DEFAULT_FREE).unwrap();
    let fit = fit_parameters(&problem).unwrap();
    assert!(fit.converged);
    assert!((fit.value(FitParam::AmplitudeScale) - scale).abs() < 1e-8);
    assert!((fit.value(FitParam::PhaseSlope) - slope).abs() < 1e-10);
    assert!((fit.value(FitParam::G) - 7.6).abs() < 1e-6);
}

#[test]
fn magnitude_only_fit() {
    let p = device();
    let grid = DetuningGrid::default();
    let obs: Vec<Observation> = [0.0, 1.0, 2.0]
        .iter()
        .map(|&r| {
            let drive = DriveField::new(r, 0.35 * PI);
            let clean = trace(&p, &drive, &grid).unwrap();
            Observation {
                trace: SpectrumTrace::from_magnitude(clean.detuning, clean.magnitude).unwrap(),
                drive,
            }
        })
        .collect();
    let guess = perturbed(&p, [-1.0, 1.0, 1.0, 0.0]);
    let problem = FitProblem::new(obs, guess, &[FitParam::G, FitParam::KappaC, FitParam::KappaM]).unwrap();
    assert_eq!(problem.residual_len(), 3 * grid.count());
    let fit = fit_parameters(&problem).unwrap();
    assert!(fit.converged);
    assert!((fit.value(FitParam::G) / 7.6 - 1.0).abs() < 1e-6);
}

#[test]
fn offset_cavity_frequency_fit() {
    // absolute frequencies: the guess sets the reference, the fit moves ω_c, ω_m
    let truth = SystemParams {
        cavity_freq: 10_090.0,
        magnon_freq: 10_090.4,
        ..device()
    };
    let grid = DetuningGrid::default();
    let mut obs = Vec::new();
    for r in [0.0, 1.0] {
        let drive = DriveField::new(r, 0.35 * PI);
        let mut tr = trace(&truth, &drive, &grid).unwrap();
        // shift the axis so detunings are measured from a guessed 10 090.3 MHz
        tr.detuning.iter_mut().for_each(|x| *x += 0.3);
        obs.push(Observation { trace: tr, drive });
    }
    let mut guess = ModelState::new(
        SystemParams {
            cavity_freq: 10_090.3,
            magnon_freq: 10_090.3,
            ..truth
        },
        PI,
    );
    guess.system.coupling_g = 7.0;
    let free = [FitParam::G, FitParam::CavityFreq, FitParam::MagnonFreq];
    let fit = fit_parameters(&FitProblem::new(obs, guess, &free).unwrap()).unwrap();
    assert!(fit.converged, "{fit:?}");
    assert!((fit.value(FitParam::CavityFreq) - 10_090.0).abs() < 1e-6);
    assert!((fit.value(FitParam::MagnonFreq) - 10_090.4).abs() < 1e-6);
}

#[test]
fn iteration_cap_gives_diagnostics() {
    let p = device();
    let obs = observations(&p, &DetuningGrid::default(), 0.0, 0);
    let mut problem = FitProblem::new(obs, perturbed(&p, [1.0; 4]), &DEFAULT_FREE).unwrap();
    problem.max_iter = 1;
    let fit = fit_parameters(&problem).unwrap();
    assert!(!fit.converged);
    assert_eq!(fit.iterations, 1);
    assert!(fit.gradient_norm > 0.0);
}

#[test]
fn residual_layout() {
    let p = device();
    let obs = observations(&p, &DetuningGrid::new(-1.0, 1.0, 5).unwrap(), 0.0, 0);
    let problem = FitProblem::new(obs, ModelState::new(p, PI), &[FitParam::G]).unwrap();
    let mut cand = problem.guess;
    cand.background = Background {
        amplitude_scale: 1.0,
        phase_slope: 0.0,
    };
    assert_eq!(residual(&problem, &cand).len(), 3 * 5 * 2);
}
