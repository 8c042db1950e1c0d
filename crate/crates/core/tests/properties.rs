use std::f64::consts::PI;

use proptest::prelude::*;

use cascade_core::observation::{Observed, Observer};
use cascade_core::sampling::{random_state, stream_rng};
use cascade_core::*;

fn field(coeffs: Vec<f64>, length: f64) -> SpectralField {
    SpectralField::new(coeffs, length).unwrap()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fractional_powers_compose(
        coeffs in prop::collection::vec(-1.0f64..1.0, 1..24),
        s1 in -2.0f64..2.0,
        s2 in -2.0f64..2.0,
        length in 0.5f64..6.0,
    ) {
        let u = field(coeffs, length);
        let lhs = u.apply_fractional_power(s2).apply_fractional_power(s1);
        let rhs = u.apply_fractional_power(s1 + s2);
        prop_assert!(rel_err(lhs.coeffs(), rhs.coeffs()) <= 1e-13);
    }

    #[test]
    fn laplacian_is_coercive(coeffs in prop::collection::vec(-1.0f64..1.0, 1..24), length in 0.5f64..6.0) {
        let u = field(coeffs, length);
        let lam1 = eigenvalue(1, length).unwrap();
        prop_assert!(u.sobolev_norm(2) >= lam1 * u.sobolev_norm(0) * (1.0 - 1e-14));
    }

    #[test]
    fn first_order_operator_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0, n in 2usize..5) {
        let cfg = CascadeConfig::uniform(n, PI, 8, Coefficient::cosine(0.5, 2.0, 0.0, 1.0), (0.0, PI));
        let sys = CascadeSystem::assemble(&cfg).unwrap();
        let mut rng = stream_rng(seed, 0);
        let u = random_state(&mut rng, &sys, &vec![1; n], &vec![true; n]);
        let v = random_state(&mut rng, &sys, &vec![1; n], &vec![true; n]);
        let mut w = u.scaled(a);
        w.axpy(b, &v);
        let mut expect = sys.apply_first_order(&u).unwrap().scaled(a);
        expect.axpy(b, &sys.apply_first_order(&v).unwrap());
        let got = sys.apply_first_order(&w).unwrap();
        prop_assert!(rel_err(&got.to_vector(), &expect.to_vector()) <= 1e-13);
    }

    #[test]
    fn inverse_first_order_roundtrips(seed in any::<u64>(), n in 2usize..5) {
        let cfg = CascadeConfig::uniform(n, PI, 16, Coefficient::bump(2.2, 2.6, 1.0, None), (2.2, 2.6));
        let sys = CascadeSystem::assemble(&cfg).unwrap();
        let mut rng = stream_rng(seed, 1);
        let u = random_state(&mut rng, &sys, &vec![1; n], &vec![true; n]);
        let back = sys.apply_first_order(&sys.apply_inverse_first_order(&u).unwrap()).unwrap();
        prop_assert!(rel_err(&back.to_vector(), &u.to_vector()) <= 1e-12);
    }

    #[test]
    fn load_is_adjoint_of_observation(seed in any::<u64>(), boundary in any::<bool>()) {
        let cfg = CascadeConfig::uniform(2, PI, 12, Coefficient::constant(1.0), (0.0, PI));
        let sys = CascadeSystem::assemble(&cfg).unwrap();
        let spec = if boundary {
            ObservationSpec::boundary(2, observation::Side::Right)
        } else {
            ObservationSpec::interior(2, Coefficient::bump(0.3, 0.9, 1.0, None), (0.3, 0.9))
        };
        let obs = Observer::new(&sys, &spec.with_observed(Observed::Position)).unwrap();
        let mut rng = stream_rng(seed, 2);
        let w = random_state(&mut rng, &sys, &[1, 1], &[true, true]);
        let (q, p) = w.to_flat();
        let v: Vec<f64> = (0..obs.output_dim()).map(|j| ((seed % 97) as f64 + j as f64).cos()).collect();
        let mut ow = vec![0.0; obs.output_dim()];
        obs.apply(&q, &p, &mut ow);
        let mut load = vec![0.0; q.len()];
        obs.load_add(&v, &mut load);
        let lhs: f64 = load.iter().zip(&q).map(|(a, b)| a * b).sum();
        let rhs: f64 = v.iter().zip(&ow).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn scaled_descriptor_scales_values(factor in -5.0f64..5.0, x in 0.0f64..PI) {
        for c in [
            Coefficient::constant(0.7),
            Coefficient::linear(1.0, 0.2),
            Coefficient::cosine(0.5, 2.0, 0.3, 1.0),
            Coefficient::bump(1.0, 2.0, 1.5, None),
            Coefficient::piecewise(vec![0.0, 1.0, PI], vec![2.0, -1.0]).unwrap(),
        ] {
            prop_assert!((c.scaled(factor).value(x) - factor * c.value(x)).abs() <= 1e-14 * (1.0 + c.value(x).abs() * factor.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn free_flow_preserves_every_level(seed in any::<u64>(), level in -2i32..3) {
        let cfg = CascadeConfig::decoupled(1, PI, 12);
        let sys = CascadeSystem::assemble(&cfg).unwrap();
        let mut rng = stream_rng(seed, 3);
        let u0 = random_state(&mut rng, &sys, &[level], &[true]);
        let traj = integrate_forward(&sys, &u0, 7.3, 0.01, None).unwrap();
        let e0 = traj.energy(0, 0, level);
        let e1 = traj.energy(traj.nodes() - 1, 0, level);
        prop_assert!((e1 - e0).abs() <= 1e-12 * e0);
    }

    #[test]
    fn observability_ratio_homogeneous(seed in any::<u64>(), factor in prop::sample::select(vec![-7.0, 0.1, 2.5, 1e4])) {
        let cfg = CascadeConfig::uniform(2, PI, 6, Coefficient::bump(2.2, 2.6, 1.0, None), (2.2, 2.6));
        let sys = CascadeSystem::assemble(&cfg).unwrap();
        let spec = ObservationSpec::interior(2, Coefficient::constant(1.0), (0.0, PI));
        let mut rng = stream_rng(seed, 4);
        let u0 = random_state(&mut rng, &sys, &[0, 1], &[true, true]);
        let a = energy::observability_ratio(&sys, &u0, 6.4, 0.02, &spec).unwrap();
        let b = energy::observability_ratio(&sys, &u0.scaled(factor), 6.4, 0.02, &spec).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }
}
