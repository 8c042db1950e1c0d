use std::f64::consts::PI;

use cascade_core::energy::{estimate_constants, uniform_inhomogeneous_check, InhomogeneousSource};
use cascade_core::*;

fn conformant(modes: usize) -> CascadeSystem {
    CascadeSystem::assemble(&CascadeConfig::uniform(2, PI, modes, Coefficient::bump(2.2, 2.6, 1.0, None), (2.2, 2.6)))
        .unwrap()
}

fn interior(component: usize) -> ObservationSpec {
    ObservationSpec::interior(component, Coefficient::bump(0.3, 0.9, 1.0, None), (0.3, 0.9))
}

#[test]
fn decoupled_first_component_flagged_unobservable() {
    let sys = CascadeSystem::assemble(&CascadeConfig::decoupled(2, PI, 6)).unwrap();
    let report = estimate_constants(&sys, &interior(2), &[8.0], 8, 1, 0.02).unwrap();
    assert!(report.estimates[0].d[0].is_unobservable());
    assert!(!report.estimates[0].d[1].is_unobservable());
}

#[test]
fn dnn_nonincreasing_in_horizon() {
    let report = estimate_constants(&conformant(8), &interior(2), &[8.0, 12.0, 16.0, 24.0], 16, 2, 0.02).unwrap();
    let d: Vec<f64> = report.dnn(2).iter().map(|e| e.value()).collect();
    assert!(d.windows(2).all(|w| w[1] <= w[0]), "{d:?}");
    assert!(report.slope_dnn.is_some());
}

#[test]
fn suprema_grow_with_sample_count() {
    let sys = conformant(6);
    let small = estimate_constants(&sys, &interior(2), &[8.0], 6, 3, 0.02).unwrap();
    let large = estimate_constants(&sys, &interior(2), &[8.0], 12, 3, 0.02).unwrap();
    let (a, b) = (&small.estimates[0], &large.estimates[0]);
    assert!(b.d[1].value() >= a.d[1].value());
    assert!(b.admissibility >= a.admissibility);
    assert!(b.min_ratio <= a.min_ratio);
}

#[test]
fn scalar_admissibility_grows_like_horizon() {
    let sys = CascadeSystem::assemble(&CascadeConfig::decoupled(1, PI, 10)).unwrap();
    let spec = ObservationSpec::interior(1, Coefficient::constant(1.0), (0.0, PI));
    let report = estimate_constants(&sys, &spec, &[8.0, 16.0], 20, 4, 0.02).unwrap();
    for e in &report.estimates {
        assert!((e.admissibility / e.horizon - 1.0).abs() <= 0.15, "{} at T = {}", e.admissibility, e.horizon);
    }
}

#[test]
fn horizons_below_floor_rejected() {
    assert!(estimate_constants(&conformant(4), &interior(2), &[6.0], 4, 0, 0.02).is_err());
    assert!(estimate_constants(&conformant(4), &interior(2), &[], 4, 0, 0.02).is_err());
    assert!(estimate_constants(&conformant(4), &interior(2), &[8.0], 0, 0, 0.02).is_err());
}

#[test]
fn inhomogeneous_constants_hold_and_scale() {
    let cfg = CascadeConfig::decoupled(1, PI, 8);
    let spec = interior(1);
    let f = InhomogeneousSource { profile: Coefficient::bump(1.0, 2.0, 1.0, None), amplitude: 1.0, frequency: 1.3, phase: 0.2 };
    let horizons = [8.0, 12.0, 16.0];
    let base = uniform_inhomogeneous_check(&cfg, &spec, &f, &horizons, 12, 5, 0.02).unwrap();
    assert!(base.holds);
    let big = uniform_inhomogeneous_check(&cfg, &spec, &f.scaled(10.0), &horizons, 12, 5, 0.02).unwrap();
    for (a, b) in base.estimates.iter().zip(&big.estimates) {
        assert!((a.alpha0 - b.alpha0).abs() <= 1e-9 * a.alpha0.max(1e-12));
    }
    let free = uniform_inhomogeneous_check(&cfg, &spec, &InhomogeneousSource::zero(), &horizons, 12, 5, 0.02).unwrap();
    assert!(free.holds && free.estimates.iter().all(|e| e.alpha0 == 0.0));
}
