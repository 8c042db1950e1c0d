//! Observation operators and the matching control loads.
//!
//! Interior specs observe `b·u'` on `(0, L)`, represented modally through the
//! multiplication matrix of `b`, so `G = L²(0, L)`. Boundary specs observe the
//! weighted normal derivative of the position, `+∂ₓu(0)` and `-∂ₓu(L)`, so
//! `G = ℝ^{#endpoints}`. In every case the observation is a matrix `O` acting
//! on one component's coefficients, and the control load is `Oᵀv`, which
//! makes `⟨Oᵀv, w⟩ = ⟨v, Ow⟩_G` hold exactly.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeConfig, CascadeSystem};
use crate::coefficients::Coefficient;
use crate::error::{invalid, Error, Result};
use crate::evolution::{SourceSpec, Trajectory};
use crate::spectral::{assemble_multiplication, basis_slope, matvec_add, matvec_transpose_add};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub side: Side,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

/// Which slot of the observed component enters `O`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observed {
    Position,
    Velocity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ObservationSpec {
    Interior {
        /// 1-based target component in `n..=n+p`.
        component: usize,
        coefficient: Coefficient,
        /// Region `ω` on which `b` is bounded below.
        region: (f64, f64),
        #[serde(default = "velocity")]
        observed: Observed,
    },
    Boundary {
        component: usize,
        endpoints: Vec<BoundaryPoint>,
        #[serde(default = "position")]
        observed: Observed,
    },
}

fn velocity() -> Observed {
    Observed::Velocity
}

fn position() -> Observed {
    Observed::Position
}

impl ObservationSpec {
    /// Interior observation of `b·u'` with `b` a bump on `ω`.
    pub fn interior(component: usize, coefficient: Coefficient, region: (f64, f64)) -> Self {
        ObservationSpec::Interior { component, coefficient, region, observed: Observed::Velocity }
    }

    /// Boundary observation at one endpoint with unit weight.
    pub fn boundary(component: usize, side: Side) -> Self {
        ObservationSpec::Boundary {
            component,
            endpoints: vec![BoundaryPoint { side, weight: 1.0 }],
            observed: Observed::Position,
        }
    }

    pub fn component(&self) -> usize {
        match self {
            ObservationSpec::Interior { component, .. } | ObservationSpec::Boundary { component, .. } => *component,
        }
    }

    pub fn observed(&self) -> Observed {
        match self {
            ObservationSpec::Interior { observed, .. } | ObservationSpec::Boundary { observed, .. } => *observed,
        }
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self, ObservationSpec::Boundary { .. })
    }

    /// Same operator, applied to the other slot.
    pub fn with_observed(&self, slot: Observed) -> Self {
        let mut s = self.clone();
        match &mut s {
            ObservationSpec::Interior { observed, .. } | ObservationSpec::Boundary { observed, .. } => *observed = slot,
        }
        s
    }

    /// Checks the target index and the positivity of the weight.
    pub fn validate(&self, cfg: &CascadeConfig) -> Result<()> {
        let c = self.component();
        if c < cfg.n || c > cfg.components() {
            return invalid(format!("observed component {c} outside {}..={}", cfg.n, cfg.components()));
        }
        match self {
            ObservationSpec::Interior { coefficient, region: (a, b), .. } => {
                coefficient.validate(cfg.length)?;
                if !(b > a) || *a < 0.0 || *b > cfg.length {
                    return invalid(format!("observation region ({a}, {b}) is empty or leaves (0, {})", cfg.length));
                }
                let grid = 2_000;
                let mut inf_on = f64::INFINITY;
                for j in 0..=grid {
                    let x = cfg.length * j as f64 / grid as f64;
                    let v = coefficient.value(x);
                    if v < 0.0 {
                        return Err(Error::InvalidCoefficient(format!("control weight {v} < 0 at x = {x}")));
                    }
                    if x > *a && x < *b {
                        inf_on = inf_on.min(v);
                    }
                }
                let mid = coefficient.value(0.5 * (a + b));
                if !(inf_on.min(mid) > 0.0) {
                    return Err(Error::InvalidCoefficient(format!(
                        "control weight is not bounded below on ({a}, {b})"
                    )));
                }
            }
            ObservationSpec::Boundary { endpoints, .. } => {
                if endpoints.is_empty() {
                    return invalid("boundary observation needs at least one endpoint");
                }
                if endpoints.len() == 2 && endpoints[0].side == endpoints[1].side || endpoints.len() > 2 {
                    return invalid("each endpoint may appear once");
                }
                if endpoints.iter().any(|e| !(e.weight > 0.0) || !e.weight.is_finite()) {
                    return invalid("boundary weights must be positive");
                }
            }
        }
        Ok(())
    }
}

/// An assembled observation `x ↦ O x` on one component.
#[derive(Debug, Clone)]
pub struct Observer {
    component: usize,
    observed: Observed,
    matrix: DMatrix<f64>,
}

impl Observer {
    pub fn new(sys: &CascadeSystem, spec: &ObservationSpec) -> Result<Self> {
        spec.validate(sys.config())?;
        let (n, l) = (sys.modes(), sys.length());
        let matrix = match spec {
            ObservationSpec::Interior { coefficient, .. } => assemble_multiplication(coefficient, n, l)?.matrix().clone(),
            ObservationSpec::Boundary { endpoints, .. } => DMatrix::from_fn(endpoints.len(), n, |r, k| {
                let e = &endpoints[r];
                match e.side {
                    Side::Left => e.weight * basis_slope(k + 1, 0.0, l),
                    Side::Right => -e.weight * basis_slope(k + 1, l, l),
                }
            }),
        };
        Ok(Self { component: spec.component() - 1, observed: spec.observed(), matrix })
    }

    /// 0-based observed component.
    pub fn component(&self) -> usize {
        self.component
    }

    pub fn observed(&self) -> Observed {
        self.observed
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Dimension of the (discrete) observation space `G`.
    pub fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn slot<'a>(&self, q: &'a [f64], p: &'a [f64], modes: usize) -> &'a [f64] {
        let src = match self.observed {
            Observed::Position => q,
            Observed::Velocity => p,
        };
        &src[self.component * modes..(self.component + 1) * modes]
    }

    /// `O x` from flat `(q, p)`.
    pub fn apply(&self, q: &[f64], p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        matvec_add(&self.matrix, self.slot(q, p, self.matrix.ncols()), 1.0, out);
    }

    /// `‖O x‖²_G`.
    pub fn norm_sq(&self, q: &[f64], p: &[f64]) -> f64 {
        let mut out = vec![0.0; self.output_dim()];
        self.apply(q, p, &mut out);
        out.iter().map(|v| v * v).sum()
    }

    /// `out += Oᵀ v` on the observed component of a flat load vector.
    pub fn load_add(&self, v: &[f64], out: &mut [f64]) {
        let n = self.matrix.ncols();
        matvec_transpose_add(&self.matrix, v, 1.0, &mut out[self.component * n..(self.component + 1) * n]);
    }

    /// Modal loads `Oᵀ v(t_m)` for a signal sampled at every node.
    pub fn load_series(&self, signal: &ObservationSeries) -> Vec<f64> {
        let n = self.matrix.ncols();
        let mut loads = vec![0.0; signal.values.len() * n];
        for (m, v) in signal.values.iter().enumerate() {
            matvec_transpose_add(&self.matrix, v, 1.0, &mut loads[m * n..(m + 1) * n]);
        }
        loads
    }
}

/// Values in `G` sampled on the trajectory grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSeries {
    pub dt: f64,
    pub values: Vec<Vec<f64>>,
}

impl ObservationSeries {
    pub fn zeros(dt: f64, nodes: usize, dim: usize) -> Self {
        Self { dt, values: vec![vec![0.0; dim]; nodes] }
    }

    pub fn nodes(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Trapezoid `∫ ‖v‖²_G dt`.
    pub fn energy(&self) -> f64 {
        trapezoid(self.values.iter().map(|v| v.iter().map(|a| a * a).sum()), self.dt)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|&a| a == 0.0))
    }

    /// CSV `t, v1, v2, ..`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|j| format!("v{j}")));
        w.write_record(&header)?;
        for (m, v) in self.values.iter().enumerate() {
            let mut row = vec![format!("{:.17e}", m as f64 * self.dt)];
            row.extend(v.iter().map(|a| format!("{a:.17e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let nums: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            let nums = nums.map_err(|e| Error::InvalidArgument(format!("bad signal value: {e}")))?;
            if nums.is_empty() {
                return invalid("empty signal row");
            }
            times.push(nums[0]);
            values.push(nums[1..].to_vec());
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        Ok(Self { dt, values })
    }
}

/// Trapezoid rule on a uniform grid.
pub fn trapezoid(values: impl Iterator<Item = f64>, dt: f64) -> f64 {
    let v: Vec<f64> = values.collect();
    match v.len() {
        0 | 1 => 0.0,
        n => dt * (v[1..n - 1].iter().sum::<f64>() + 0.5 * (v[0] + v[n - 1])),
    }
}

fn check_target(traj: &Trajectory, spec: &ObservationSpec) -> Result<()> {
    let c = spec.component();
    if c < traj.n || c > traj.components() {
        return invalid(format!("observed component {c} outside {}..={}", traj.n, traj.components()));
    }
    Ok(())
}

/// `t ↦ O x(t)` along a trajectory.
pub fn observe(sys: &CascadeSystem, traj: &Trajectory, spec: &ObservationSpec) -> Result<ObservationSeries> {
    check_target(traj, spec)?;
    let obs = Observer::new(sys, spec)?;
    let mut series = ObservationSeries::zeros(traj.dt, traj.nodes(), obs.output_dim());
    for (m, v) in series.values.iter_mut().enumerate() {
        obs.apply(traj.positions(m), traj.velocities(m), v);
    }
    Ok(series)
}

/// Trapezoid `∫₀ᵀ ‖O x(t)‖²_G dt`.
pub fn admissibility_integral(sys: &CascadeSystem, traj: &Trajectory, spec: &ObservationSpec) -> Result<f64> {
    Ok(observe(sys, traj, spec)?.energy())
}

/// Source `Oᵀ v(t_m)` on the observed component.
pub fn control_load(sys: &CascadeSystem, spec: &ObservationSpec, signal: &ObservationSeries) -> Result<SourceSpec> {
    let obs = Observer::new(sys, spec)?;
    if signal.values.iter().any(|v| v.len() != obs.output_dim()) {
        return invalid(format!("control values must have dimension {}", obs.output_dim()));
    }
    let mut src = SourceSpec::empty(sys.modes(), signal.nodes());
    src.push(obs.component(), obs.load_series(signal))?;
    Ok(src)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::CascadeState;
    use crate::evolution::integrate_forward;
    use crate::spectral::SpectralField;
    use std::f64::consts::PI;

    fn scalar(modes: usize) -> CascadeSystem {
        CascadeSystem::assemble(&CascadeConfig::decoupled(1, PI, modes)).unwrap()
    }

    fn full_interior() -> ObservationSpec {
        ObservationSpec::interior(1, Coefficient::constant(1.0), (0.0, PI))
    }

    #[test]
    fn zero_trajectory_zero_series() {
        let sys = scalar(6);
        let traj = integrate_forward(&sys, &sys.zero_state(), 1.0, 0.05, None).unwrap();
        let s = observe(&sys, &traj, &full_interior()).unwrap();
        assert!(s.is_zero());
        assert_eq!(admissibility_integral(&sys, &traj, &ObservationSpec::boundary(1, Side::Left)).unwrap(), 0.0);
    }

    #[test]
    fn boundary_trace_of_first_mode() {
        let sys = scalar(4);
        let mut u0 = sys.zero_state();
        u0.positions[0] = SpectralField::unit_mode(1, 4, PI).unwrap();
        let traj = integrate_forward(&sys, &u0, 3.0, 1e-3, None).unwrap();
        let s = observe(&sys, &traj, &ObservationSpec::boundary(1, Side::Left)).unwrap();
        let c = (2.0 / PI).sqrt();
        for m in (0..=3000).step_by(300) {
            assert!((s.values[m][0] - c * traj.time(m).cos()).abs() < 1e-12);
        }
        // ∫ (2/π) cos² t = (2/π)(T/2 + sin 2T / 4)
        let exact = 2.0 / PI * (1.5 + (6.0f64).sin() / 4.0);
        let got = s.energy();
        assert!((got - exact).abs() < 1e-6 * exact, "{got} vs {exact}");
    }

    #[test]
    fn full_interior_observation_is_kinetic_energy() {
        let sys = scalar(6);
        let u0 = CascadeState::from_vector(&[0.2, -0.1, 0.4, 0.0, 0.3, 0.1, 1.0, 0.5, -0.2, 0.3, 0.0, 0.7], 1, 6, PI);
        let traj = integrate_forward(&sys, &u0, 1.0, 1e-2, None).unwrap();
        let s = observe(&sys, &traj, &full_interior()).unwrap();
        for m in [0, 37, 100] {
            let norm: f64 = s.values[m].iter().map(|a| a * a).sum();
            let kinetic: f64 = traj.component_velocity(m, 0).iter().map(|a| a * a).sum();
            assert!((norm - kinetic).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_interior_integral_closed_form() {
        // u = sin(2t)/2·φ_2: u' = cos(2t)φ_2, ∫₀ᵀ cos² 2t = T/2 + sin 4T / 8.
        let sys = scalar(4);
        let mut u0 = sys.zero_state();
        u0.velocities[0] = SpectralField::unit_mode(2, 4, PI).unwrap();
        let t = PI;
        let traj = integrate_forward(&sys, &u0, t, PI / 4000.0, None).unwrap();
        let got = admissibility_integral(&sys, &traj, &full_interior()).unwrap();
        let exact = t / 2.0 + (4.0 * t).sin() / 8.0;
        assert!((got - exact).abs() < 1e-6);
    }

    #[test]
    fn right_boundary_load_alternates() {
        let sys = scalar(6);
        let spec = ObservationSpec::boundary(1, Side::Right);
        let signal = ObservationSeries { dt: 0.1, values: vec![vec![1.0]; 3] };
        let src = control_load(&sys, &spec, &signal).unwrap();
        let loads = &src.terms[0].loads[..6];
        let c = (2.0 / PI).sqrt();
        for (k, f) in loads.iter().enumerate() {
            let kk = (k + 1) as f64;
            // -φ_k'(π) = -(√(2/π)) k cos kπ = (-1)^{k+1} k √(2/π)
            let expected = -c * kk * (kk * PI).cos();
            assert!((f - expected).abs() < 1e-13);
        }
        let zero = ObservationSeries { dt: 0.1, values: vec![vec![0.0]; 3] };
        assert!(control_load(&sys, &spec, &zero).unwrap().is_zero());
    }

    #[test]
    fn identity_weight_passes_signal_through() {
        let sys = scalar(4);
        let signal = ObservationSeries {
            dt: 0.5,
            values: (0..4).map(|m| vec![(0.5 * m as f64).sin(), 0.0, 0.0, 0.0]).collect(),
        };
        let src = control_load(&sys, &full_interior(), &signal).unwrap();
        for m in 0..4 {
            assert!((src.terms[0].loads[4 * m] - (0.5 * m as f64).sin()).abs() < 1e-13);
            assert!(src.terms[0].loads[4 * m + 1].abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let cfg = CascadeConfig::decoupled(2, PI, 4);
        assert!(ObservationSpec::boundary(1, Side::Left).validate(&cfg).is_err());
        assert!(ObservationSpec::boundary(3, Side::Left).validate(&cfg).is_err());
        assert!(ObservationSpec::interior(2, Coefficient::constant(-1.0), (0.3, 0.9)).validate(&cfg).is_err());
        assert!(ObservationSpec::interior(2, Coefficient::bump(0.3, 0.9, 1.0, None), (0.3, 0.9))
            .validate(&cfg)
            .is_ok());
        let twice = ObservationSpec::Boundary {
            component: 2,
            endpoints: vec![BoundaryPoint { side: Side::Left, weight: 1.0 }, BoundaryPoint { side: Side::Left, weight: 1.0 }],
            observed: Observed::Position,
        };
        assert!(twice.validate(&cfg).is_err());
    }

    #[test]
    fn signal_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        let s = ObservationSeries { dt: 0.25, values: vec![vec![1.0, -2.5], vec![0.125, 3.0], vec![0.0, 1e-300]] };
        s.write_csv(&path).unwrap();
        let back = ObservationSeries::read_csv(&path).unwrap();
        assert_eq!(back, s);
    }
}
