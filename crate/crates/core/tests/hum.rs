use std::f64::consts::PI;

use cascade_core::hum::*;
use cascade_core::observation::{observe, trapezoid, Observed, Side};
use cascade_core::sampling::{random_state, stream_rng};
use cascade_core::*;

fn cascade(c21: Coefficient, modes: usize) -> CascadeSystem {
    CascadeSystem::assemble(&CascadeConfig::uniform(2, PI, modes, c21, (2.2, 2.6))).unwrap()
}

fn interior(component: usize) -> ObservationSpec {
    ObservationSpec::interior(component, Coefficient::bump(0.3, 0.9, 1.0, None), (0.3, 0.9))
}

fn random_problem(sys: &CascadeSystem, horizon: f64, dt: f64, seed: u64) -> ControlProblem {
    let p = ControlProblem::new(sys.clone(), sys.zero_state(), horizon, dt, vec![interior(2)], ControlVariant::Bounded)
        .unwrap();
    let mut rng = stream_rng(seed, 0);
    let y0 = random_state(&mut rng, sys, &p.state_levels(), &[true, true]);
    p.with_initial(y0).unwrap()
}

/// Per-mode HUM for `y'' + Ay = v` with full control: on the grid the adjoint
/// mode is `a cos(ω(t-T)) + b sin(ω(t-T))/ω`, the control is the adjoint
/// itself, and each mode is a 2×2 Gramian system.
fn scalar_hum_energy(y0: &[f64], y1: &[f64], horizon: f64, dt: f64) -> f64 {
    let steps = (horizon / dt).round() as usize;
    let mut total = 0.0;
    for k in 0..y0.len() {
        let w = (k + 1) as f64;
        let basis = |m: usize| {
            let s = m as f64 * dt - horizon;
            [(w * s).cos(), (w * s).sin() / w]
        };
        let mut g = [[0.0; 2]; 2];
        for m in 0..=steps {
            let wt = if m == 0 || m == steps { 0.5 * dt } else { dt };
            let b = basis(m);
            for i in 0..2 {
                for j in 0..2 {
                    g[i][j] += wt * b[i] * b[j];
                }
            }
        }
        let s0 = -horizon;
        let w0 = [(w * s0).cos(), (w * s0).sin() / w];
        let dw0 = [-w * (w * s0).sin(), (w * s0).cos()];
        let ell = [y1[k] * w0[0] - y0[k] * dw0[0], y1[k] * w0[1] - y0[k] * dw0[1]];
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let x = [
            -(g[1][1] * ell[0] - g[0][1] * ell[1]) / det,
            -(-g[1][0] * ell[0] + g[0][0] * ell[1]) / det,
        ];
        total -= x[0] * ell[0] + x[1] * ell[1];
    }
    total
}

#[test]
fn scalar_control_energy_matches_per_mode_oracle() {
    let cfg = CascadeConfig::decoupled(1, PI, 10);
    let sys = CascadeSystem::assemble(&cfg).unwrap();
    let spec = ObservationSpec::interior(1, Coefficient::constant(1.0), (0.0, PI));
    let mut rng = stream_rng(21, 0);
    let y0 = random_state(&mut rng, &sys, &[1], &[true]);
    let dt = 2.0 * PI / 2000.0;
    let problem = ControlProblem::new(sys, y0.clone(), 2.0 * PI, dt, vec![spec], ControlVariant::Bounded).unwrap();
    let sol = solve_hum(&problem, &SolveOptions::default()).unwrap();
    let oracle = scalar_hum_energy(y0.positions[0].coeffs(), y0.velocities[0].coeffs(), 2.0 * PI, dt);
    assert!((sol.control_energy - oracle).abs() <= 1e-4 * oracle, "{} vs {oracle}", sol.control_energy);
}

#[test]
fn dense_gramian_matches_observed_adjoint_pairings() {
    let sys = cascade(Coefficient::bump(2.3, 2.5, 1.0, None), 4);
    let (horizon, dt) = (6.0, 0.02);
    let problem = random_problem(&sys, horizon, dt, 1);
    let g = dense_gramian(&problem).unwrap();
    let spec = interior(2).with_observed(Observed::Position);
    let series: Vec<_> = (0..problem.dimension())
        .map(|j| {
            let adj = integrate_backward(&sys, &basis_state(&problem, j), horizon, dt).unwrap();
            observe(&sys, &adj, &spec).unwrap()
        })
        .collect();
    for a in 0..series.len() {
        for b in 0..series.len() {
            let oracle = trapezoid(
                series[a].values.iter().zip(&series[b].values).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum()),
                dt,
            );
            assert!((g.matrix[(a, b)] - oracle).abs() <= 1e-10 * g.matrix.amax());
        }
    }
    assert!(g.asymmetry <= 1e-12);
}

#[test]
fn gramian_symmetric_on_random_pairs() {
    let sys = cascade(Coefficient::bump(2.3, 2.5, 1.0, None), 6);
    let problem = random_problem(&sys, 6.0, 0.02, 2);
    let mut rng = stream_rng(3, 0);
    for _ in 0..4 {
        let x = random_state(&mut rng, &sys, &[1, 1], &[true, true]);
        let y = random_state(&mut rng, &sys, &[1, 1], &[true, true]);
        let xy = pairing(&gramian_apply(&problem, &x).unwrap(), &y);
        let yx = pairing(&gramian_apply(&problem, &y).unwrap(), &x);
        let scale = pairing(&x, &x).sqrt() * pairing(&y, &y).sqrt();
        assert!((xy - yx).abs() <= 1e-9 * scale);
    }
}

#[test]
fn gramian_monotone_in_horizon() {
    let sys = cascade(Coefficient::bump(2.3, 2.5, 1.0, None), 6);
    let mut rng = stream_rng(4, 0);
    let wt = random_state(&mut rng, &sys, &[1, 1], &[true, true]);
    let mut last = 0.0;
    for horizon in [2.0, 4.0, 8.0, 16.0] {
        let problem = random_problem(&sys, horizon, 0.02, 5);
        let q = pairing(&gramian_apply(&problem, &wt).unwrap(), &wt);
        assert!(q >= last);
        last = q;
    }
    let lo = dense_gramian(&random_problem(&sys, 8.0, 0.02, 5)).unwrap().min_eigenvalue();
    let hi = dense_gramian(&random_problem(&sys, 16.0, 0.02, 5)).unwrap().min_eigenvalue();
    assert!(lo > 0.0 && hi >= lo * (1.0 - 1e-10));
}

#[test]
fn decoupled_first_component_block_vanishes() {
    let sys = cascade(Coefficient::zero(), 6);
    let g = dense_gramian(&random_problem(&sys, 8.0, 0.02, 6)).unwrap();
    let block = g.component_indices(0, 2, 6);
    assert_eq!(block.len(), 12);
    assert!(g.block_eigenvalues(&block).iter().all(|e| e.abs() <= 1e-12));
}

#[test]
fn linear_form_forward_and_backward_routes_agree() {
    let sys = cascade(Coefficient::bump(2.3, 2.5, 1.0, None), 5);
    let problem = random_problem(&sys, 5.0, 0.02, 7);
    let basis: Vec<_> = (0..problem.dimension()).map(|j| basis_state(&problem, j)).collect();
    let back = assemble_linear_form(&problem, &basis).unwrap();
    let fwd = linear_form(&problem).unwrap();
    let scale = fwd.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for (a, b) in back.iter().zip(&fwd) {
        assert!((a - b).abs() <= 1e-11 * scale);
    }
    let doubled = problem.with_initial(problem.initial().scaled(2.0)).unwrap();
    for (a, b) in assemble_linear_form(&doubled, &basis).unwrap().iter().zip(&back) {
        assert!((a - 2.0 * b).abs() <= 1e-12 * scale);
    }
}

#[test]
fn linear_form_single_mode_by_hand() {
    let sys = cascade(Coefficient::bump(2.3, 2.5, 1.0, None), 4);
    let base = random_problem(&sys, 4.0, 0.02, 8);
    let mut y0 = sys.zero_state();
    y0.velocities[0].coeffs_mut()[1] = 1.5;
    y0.positions[1].coeffs_mut()[0] = -0.5;
    let problem = base.with_initial(y0).unwrap();
    let mut rng = stream_rng(9, 0);
    let wt = random_state(&mut rng, &sys, &[1, 1], &[true, true]);
    let w0 = integrate_backward(&sys, &wt, 4.0, 0.02).unwrap().initial();
    let by_hand = 1.5 * w0.positions[0].coeffs()[1] + 0.5 * w0.velocities[1].coeffs()[0];
    let got = assemble_linear_form(&problem, &[wt]).unwrap()[0];
    assert!((got - by_hand).abs() <= 1e-13 * by_hand.abs().max(1.0));
}

#[test]
fn cg_and_dense_agree_on_steering() {
    let sys = cascade(Coefficient::bump(2.2, 2.6, 1.0, None), 8);
    let problem = random_problem(&sys, 12.0, 0.02, 10);
    let dense = solve_hum(&problem, &SolveOptions { method: SolverMethod::Dense, ..Default::default() }).unwrap();
    let cg = solve_hum(&problem, &SolveOptions { method: SolverMethod::Cg, ..Default::default() }).unwrap();
    assert!(dense.success && cg.success);
    assert!((dense.control_energy - cg.control_energy).abs() <= 1e-6 * dense.control_energy);
    let replay = simulate_controlled(&problem, &cg.controls).unwrap().terminal();
    assert!(problem.natural_energy(&replay) <= 1e-6 * cg.initial_energy);
}

#[test]
fn boundary_variant_steers() {
    let sys = cascade(Coefficient::bump(2.2, 2.6, 1.0, None), 8);
    let problem = ControlProblem::new(
        sys.clone(),
        sys.zero_state(),
        12.0,
        0.02,
        vec![ObservationSpec::boundary(2, Side::Left)],
        ControlVariant::Unbounded,
    )
    .unwrap();
    let mut rng = stream_rng(11, 0);
    let y0 = random_state(&mut rng, &sys, &problem.state_levels(), &[true, true]);
    let sol = solve_hum(&problem.with_initial(y0).unwrap(), &SolveOptions::default()).unwrap();
    assert!(sol.relative_residual() <= 1e-6);
}

#[test]
fn mixed_system_steers() {
    let mut cfg = CascadeConfig::uniform(2, PI, 6, Coefficient::bump(2.2, 2.6, 1.0, None), (2.2, 2.6));
    cfg.p = 1;
    cfg.offdiagonal.push(cascade::OffdiagonalCoupling { row: 3, col: 2, coefficient: Coefficient::constant(0.5) });
    let sys = CascadeSystem::assemble(&cfg).unwrap();
    let controls = vec![ObservationSpec::boundary(2, Side::Left), interior(3)];
    let problem =
        ControlProblem::new(sys.clone(), sys.zero_state(), 12.0, 0.02, controls, ControlVariant::Mixed { q: 0 }).unwrap();
    let mut rng = stream_rng(12, 0);
    let y0 = random_state(&mut rng, &sys, &problem.state_levels(), &[true; 3]);
    let sol = solve_hum(&problem.with_initial(y0).unwrap(), &SolveOptions::default()).unwrap();
    assert_eq!(sol.controls.len(), 2);
    assert!(sol.relative_residual() <= 1e-6);
}

#[test]
fn decoupled_cascade_is_not_controllable() {
    let sys = cascade(Coefficient::zero(), 6);
    let problem = random_problem(&sys, 12.0, 0.02, 13);
    let report = synthesize(&problem, &SolveOptions::default()).unwrap();
    assert!(!report.success);
    assert_eq!(report.uncontrolled_dimension, 12);
    assert!(matches!(solve_hum(&problem, &SolveOptions::default()), Err(Error::NotControllable { .. })));
}

#[test]
fn dense_assembly_respects_cap() {
    let sys = CascadeSystem::assemble(&CascadeConfig::decoupled(1, PI, 2001)).unwrap();
    let dt = 0.5 / 2001.0;
    let problem = ControlProblem::new(
        sys.clone(),
        sys.zero_state(),
        dt,
        dt,
        vec![ObservationSpec::boundary(1, Side::Left)],
        ControlVariant::Unbounded,
    )
    .unwrap();
    assert!(matches!(dense_gramian(&problem), Err(Error::TooLarge { dimension: 4002, cap: 4000 })));
}

#[test]
fn mode_filter_reduces_unknowns() {
    let sys = cascade(Coefficient::bump(2.2, 2.6, 1.0, None), 8);
    let problem = ControlProblem::with_filter(
        sys.clone(),
        sys.zero_state(),
        8.0,
        0.02,
        vec![interior(2)],
        ControlVariant::Bounded,
        Some(3),
    )
    .unwrap();
    assert_eq!(problem.dimension(), 12);
    let mut y0 = sys.zero_state();
    y0.positions[0].coeffs_mut()[0] = 1.0;
    y0.velocities[1].coeffs_mut()[2] = 1.0;
    let sol = synthesize(&problem.with_initial(y0).unwrap(), &SolveOptions::default()).unwrap();
    assert_eq!(sol.dimension, 12);
}
