use std::f64::consts::PI;

use cascade_core::evolution::{integrate_controlled, SourceSpec};
use cascade_core::hum::SolveOptions;
use cascade_core::sampling::{random_state, stream_rng};
use cascade_core::scenarios::*;
use cascade_core::*;

fn system(modes: usize) -> SimultaneousSystem {
    SimultaneousSystem::new(
        PI,
        modes,
        Coefficient::bump(1.0, 1.4, 1.0, None),
        (1.0, 1.4),
        Coefficient::bump(2.2, 2.6, 1.0, None),
        (2.2, 2.6),
    )
}

fn random_p(modes: usize, seed: u64) -> CascadeState {
    let sys = CascadeSystem::assemble(&CascadeConfig::decoupled(3, PI, modes)).unwrap();
    let mut rng = stream_rng(seed, 0);
    random_state(&mut rng, &sys, &[3, 3, 3], &[true; 3])
}

#[test]
fn parallel_and_cascade_trajectories_agree_under_transform() {
    let sys = system(8);
    let (cfg, t) = simultaneous_to_cascade(&sys);
    let cascade = CascadeSystem::assemble(&cfg).unwrap();
    let p0 = random_p(8, 1);
    let (horizon, dt) = (5.0, 0.01);
    let nodes = 501;
    let h: Vec<Vec<f64>> = (0..nodes)
        .map(|m| (0..8).map(|k| (0.9 * m as f64 * dt + k as f64).sin() / (1.0 + k as f64)).collect())
        .collect();
    let p_t = ParallelSystem::assemble(&sys).unwrap().terminal(&p0, horizon, dt, Some(&h)).unwrap();
    let loads: Vec<f64> = h.iter().flat_map(|row| row.iter().map(|v| SOURCE_FACTOR * v)).collect();
    let mut src = SourceSpec::empty(8, nodes);
    src.push(2, loads).unwrap();
    let y = integrate_controlled(&cascade, &t.apply(&p0), horizon, dt, Some(&src)).unwrap().terminal();
    let mapped = t.apply(&p_t);
    let err = mapped.to_vector().iter().zip(y.to_vector()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-8 * y.max_abs(), "{err}");
}

#[test]
fn zero_data_needs_zero_control() {
    let sys = system(6);
    let p0 = CascadeState::from_vector(&vec![0.0; 36], 3, 6, PI);
    let sol = solve_simultaneous(&sys, &p0, 12.0, 0.02, &SolveOptions::default()).unwrap();
    assert!(sol.h.is_zero());
    assert_eq!(sol.terminal_energy, 0.0);
}

#[test]
fn simultaneous_control_steers_all_components() {
    let sys = system(8);
    let p0 = random_p(8, 2);
    let sol = solve_simultaneous(&sys, &p0, 16.0, 0.02, &SolveOptions::default()).unwrap();
    assert!(sol.success);
    assert!(sol.relative_energy() <= 1e-6);
}

#[test]
fn missing_first_coupling_is_not_controllable() {
    let mut sys = system(6);
    sys.alpha = Coefficient::zero();
    let err = solve_simultaneous(&sys, &random_p(6, 3), 16.0, 0.02, &SolveOptions::default()).unwrap_err();
    assert!(matches!(err, Error::NotControllable { .. }));
}

fn insensitizing(modes: usize) -> InsensitizingProblem {
    InsensitizingProblem {
        length: PI,
        modes,
        observation: Coefficient::bump(2.2, 2.6, 1.0, None),
        observation_region: (2.2, 2.6),
        control: Coefficient::bump(0.3, 0.9, 1.0, None),
        control_region: (0.3, 0.9),
        y0: (1..=modes).map(|k| 1.0 / (k * k) as f64).collect(),
        y1: (1..=modes).map(|k| (-1f64).powi(k as i32) / (k * k) as f64).collect(),
        horizon: 12.0,
        dt: 0.02,
    }
}

#[test]
fn insensitizing_control_kills_sensitivity() {
    let report = insensitizing_pipeline(&insensitizing(8), &SolveOptions::default(), 3, 5, 1e-4).unwrap();
    assert!(report.hum.success);
    assert!(report.controlled.max_relative <= 1e-4);
    let weakest = report
        .uncontrolled
        .entries
        .iter()
        .map(|e| e.relative_tau0.max(e.relative_tau1))
        .fold(f64::INFINITY, f64::min);
    assert!(weakest >= 10.0 * report.controlled.max_relative);
}

#[test]
fn functional_is_quadratic_in_perturbation() {
    let problem = insensitizing(6);
    let (z0, z1) = unit_perturbation(3, 0, 6, PI);
    let (d0, _) = problem.sensitivity(None, &z0, &z1, 1e-4).unwrap();
    let (d0_big, _) = problem.sensitivity(None, &z0, &z1, 1e-1).unwrap();
    assert!((d0 - d0_big).abs() <= 1e-8 * d0.abs());
    assert!((z0.sobolev_norm(1) - 1.0).abs() <= 1e-14 && (z1.sobolev_norm(0) - 1.0).abs() <= 1e-14);
}
