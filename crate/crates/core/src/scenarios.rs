//! End-to-end applications: simultaneous control of three coupled wave
//! equations through a cascade change of variables, and insensitizing
//! controls for the scalar wave equation.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeConfig, CascadeState, CascadeSystem, SubdiagonalCoupling};
use crate::coefficients::Coefficient;
use crate::energy::total_energy;
use crate::error::{invalid, Result};
use crate::evolution::{integrate_controlled, time_grid};
use crate::hum::{solve_hum, synthesize, ControlProblem, ControlVariant, HumSolution, SolveOptions};
use crate::observation::{control_load, trapezoid, ObservationSeries, ObservationSpec};
use crate::sampling::{random_component, stream_rng};
use crate::spectral::{assemble_multiplication, eigenvalue_unchecked, matvec_add, SpectralField};

/// `y = M p` for the parallel system.
pub const TRANSFORM: [[f64; 3]; 3] = [[-0.25, 0.25, -0.5], [0.75, -0.25, -0.5], [-1.0, 1.0, 1.0]];
/// Control profile `v = η h` on the three parallel equations.
pub const CONTROL_PROFILE: [f64; 3] = [2.0, 4.0, 1.0];
/// `(M η)_3`: the cascade sees `3h` on its last component and nothing elsewhere.
pub const SOURCE_FACTOR: f64 = 3.0;

/// `Q_ij = a_ij α + b_ij β` in `p'' - ℒp + Qp = v`. The (2,1) entry is
/// `3α - β`, the sign for which `M Q M⁻¹` is the bi-diagonal cascade.
const Q_ALPHA: [[f64; 3]; 3] = [[-3.0, 1.0, 2.0], [3.0, -1.0, -2.0], [-6.0, 2.0, 4.0]];
const Q_BETA: [[f64; 3]; 3] = [[-1.0, 1.0, 1.0], [-1.0, 1.0, 1.0], [0.0, 0.0, 0.0]];

/// Control coefficient `b` and the region where it is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRegion {
    pub coefficient: Coefficient,
    pub region: (f64, f64),
}

/// Three wave equations coupled through `α` and `β`, driven by one scalar
/// control `h` distributed as `(2h, 4h, h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimultaneousSystem {
    #[serde(deserialize_with = "crate::cascade::deserialize_length")]
    pub length: f64,
    pub modes: usize,
    pub alpha: Coefficient,
    pub alpha_region: (f64, f64),
    pub beta: Coefficient,
    pub beta_region: (f64, f64),
    /// Defaults to `b ≡ 1` on the whole interval.
    #[serde(default)]
    pub control: Option<ControlRegion>,
}

impl SimultaneousSystem {
    pub fn new(
        length: f64,
        modes: usize,
        alpha: Coefficient,
        alpha_region: (f64, f64),
        beta: Coefficient,
        beta_region: (f64, f64),
    ) -> Self {
        Self { length, modes, alpha, alpha_region, beta, beta_region, control: None }
    }

    pub fn with_control(mut self, coefficient: Coefficient, region: (f64, f64)) -> Self {
        self.control = Some(ControlRegion { coefficient, region });
        self
    }

    pub fn control_region(&self) -> ControlRegion {
        self.control
            .clone()
            .unwrap_or(ControlRegion { coefficient: Coefficient::constant(1.0), region: (0.0, self.length) })
    }
}

/// Change of variables between the parallel and cascade forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub matrix: Matrix3<f64>,
    pub inverse: Matrix3<f64>,
}

impl Transform {
    pub fn new() -> Self {
        let matrix = Matrix3::from_fn(|r, c| TRANSFORM[r][c]);
        let inverse = matrix.try_inverse().expect("transform is invertible");
        Self { matrix, inverse }
    }

    fn mix(m: &Matrix3<f64>, u: &CascadeState) -> CascadeState {
        let mut out = u.scaled(0.0);
        for r in 0..3 {
            for c in 0..3 {
                let f = m[(r, c)];
                if f != 0.0 {
                    out.positions[r].axpy(f, &u.positions[c]);
                    out.velocities[r].axpy(f, &u.velocities[c]);
                }
            }
        }
        out
    }

    /// `p ↦ y = M p`, mode by mode.
    pub fn apply(&self, p: &CascadeState) -> CascadeState {
        Self::mix(&self.matrix, p)
    }

    /// `y ↦ p = M⁻¹ y`.
    pub fn invert(&self, y: &CascadeState) -> CascadeState {
        Self::mix(&self.inverse, y)
    }
}

impl Default for Transform {
    fn default() -> Self {
        Self::new()
    }
}

/// Cascade with couplings `6α` (row 2) and `β/2` (row 3) and the transform.
pub fn simultaneous_to_cascade(sys: &SimultaneousSystem) -> (CascadeConfig, Transform) {
    let mut cfg = CascadeConfig::decoupled(3, sys.length, sys.modes);
    cfg.subdiagonal = vec![
        SubdiagonalCoupling {
            row: 2,
            coefficient: sys.alpha.scaled(6.0),
            region: sys.alpha_region,
            alpha: None,
            beta: None,
        },
        SubdiagonalCoupling {
            row: 3,
            coefficient: sys.beta.scaled(0.5),
            region: sys.beta_region,
            alpha: None,
            beta: None,
        },
    ];
    (cfg, Transform::new())
}

/// Galerkin form of the parallel system `p'' + Ap + Qp = f`.
#[derive(Debug, Clone)]
pub struct ParallelSystem {
    modes: usize,
    length: f64,
    coupling: Vec<DMatrix<f64>>,
}

impl ParallelSystem {
    pub fn assemble(sys: &SimultaneousSystem) -> Result<Self> {
        let ma = assemble_multiplication(&sys.alpha, sys.modes, sys.length)?;
        let mb = assemble_multiplication(&sys.beta, sys.modes, sys.length)?;
        let coupling = (0..9)
            .map(|rc| {
                let (r, c) = (rc / 3, rc % 3);
                ma.matrix() * Q_ALPHA[r][c] + mb.matrix() * Q_BETA[r][c]
            })
            .collect();
        Ok(Self { modes: sys.modes, length: sys.length, coupling })
    }

    /// `(Q p)_i` as a flat vector.
    pub fn coupling_apply(&self, q: &[f64], out: &mut [f64]) {
        let n = self.modes;
        out.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..3 {
            for c in 0..3 {
                matvec_add(&self.coupling[3 * r + c], &q[c * n..(c + 1) * n], 1.0, &mut out[r * n..(r + 1) * n]);
            }
        }
    }

    /// Terminal state under per-node loads `h` on the profile `(2, 4, 1)`,
    /// same splitting as the cascade integrator.
    pub fn terminal(&self, p0: &CascadeState, horizon: f64, dt: f64, h: Option<&[Vec<f64>]>) -> Result<CascadeState> {
        let n = self.modes;
        let steps = (horizon / dt).round() as usize;
        if let Some(h) = h {
            if h.len() != steps + 1 || h.iter().any(|v| v.len() != n) {
                return invalid("control loads do not match the time grid");
            }
        }
        let omega: Vec<f64> = (1..=n).map(|k| eigenvalue_unchecked(k, self.length).sqrt()).collect();
        let (mut q, mut p) = p0.to_flat();
        let mut kick = vec![0.0; 3 * n];
        let half = 0.5 * dt;
        for m in 0..steps {
            for stage in 0..2 {
                let node = m + stage;
                self.coupling_apply(&q, &mut kick);
                for (j, pj) in p.iter_mut().enumerate() {
                    let mut f = -kick[j];
                    if let Some(h) = h {
                        f += CONTROL_PROFILE[j / n] * h[node][j % n];
                    }
                    *pj += half * f;
                }
                if stage == 0 {
                    for (j, (qj, pj)) in q.iter_mut().zip(p.iter_mut()).enumerate() {
                        let w = omega[j % n];
                        let (c, s) = ((w * dt).cos(), (w * dt).sin());
                        let (a, b) = (*qj, *pj);
                        *qj = a * c + b * s / w;
                        *pj = -a * w * s + b * c;
                    }
                }
            }
        }
        Ok(CascadeState::from_flat(&q, &p, 3, n, self.length))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimultaneousSolution {
    pub hum: HumSolution,
    /// Modal coefficients of `h(·, t)` at every node.
    pub h: ObservationSeries,
    pub terminal: CascadeState,
    /// Sum of level-1 energies of `p(0)`.
    pub initial_energy: f64,
    /// Sum of level-1 energies of `p(T)` from the parallel simulation.
    pub terminal_energy: f64,
    pub success: bool,
}

impl SimultaneousSolution {
    pub fn relative_energy(&self) -> f64 {
        if self.initial_energy > 0.0 {
            self.terminal_energy / self.initial_energy
        } else {
            self.terminal_energy
        }
    }
}

/// HUM control problem of the cascade form for parallel initial data `p0`.
pub fn simultaneous_problem(sys: &SimultaneousSystem, p0: &CascadeState, horizon: f64, dt: f64) -> Result<ControlProblem> {
    let (cfg, transform) = simultaneous_to_cascade(sys);
    let cascade = CascadeSystem::assemble(&cfg)?;
    cascade.check_state(p0)?;
    let control = sys.control_region();
    let spec = ObservationSpec::interior(3, control.coefficient.scaled(SOURCE_FACTOR), control.region);
    ControlProblem::new(cascade, transform.apply(p0), horizon, dt, vec![spec], ControlVariant::Bounded)
}

/// Steers all three parallel components with the scalar control `h`.
pub fn solve_simultaneous(
    sys: &SimultaneousSystem,
    p0: &CascadeState,
    horizon: f64,
    dt: f64,
    opts: &SolveOptions,
) -> Result<SimultaneousSolution> {
    let problem = simultaneous_problem(sys, p0, horizon, dt)?;
    let hum = solve_hum(&problem, opts)?;
    let b = assemble_multiplication(&sys.control_region().coefficient, sys.modes, sys.length)?;
    let signal = &hum.controls[0];
    let mut h = ObservationSeries::zeros(signal.dt, signal.nodes(), sys.modes);
    for (out, v) in h.values.iter_mut().zip(&signal.values) {
        matvec_add(b.matrix(), v, 1.0, out);
    }
    let parallel = ParallelSystem::assemble(sys)?;
    let terminal = parallel.terminal(p0, horizon, dt, Some(&h.values))?;
    let levels = [1, 1, 1];
    let initial_energy = total_energy(p0, &levels);
    let terminal_energy = total_energy(&terminal, &levels);
    let success = terminal_energy <= 100.0 * opts.tol * initial_energy;
    Ok(SimultaneousSolution { hum, h, terminal, initial_energy, terminal_energy, success })
}

/// Scalar wave `y'' - Δy = b v` with observation weight `c`; the control
/// must make `½∫∫ c y²` insensitive to perturbations of the initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsensitizingProblem {
    #[serde(deserialize_with = "crate::cascade::deserialize_length")]
    pub length: f64,
    pub modes: usize,
    pub observation: Coefficient,
    pub observation_region: (f64, f64),
    pub control: Coefficient,
    pub control_region: (f64, f64),
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
}

impl InsensitizingProblem {
    fn cascade(&self) -> Result<CascadeSystem> {
        let cfg = CascadeConfig::uniform(2, self.length, self.modes, self.observation.clone(), self.observation_region);
        CascadeSystem::assemble(&cfg)
    }

    fn spec(&self) -> ObservationSpec {
        ObservationSpec::interior(2, self.control.clone(), self.control_region)
    }

    /// Auxiliary component zero, state component carrying `(y0, y1)`.
    fn initial(&self, y0: &SpectralField, y1: &SpectralField) -> Result<CascadeState> {
        let sys = self.cascade()?;
        let mut state = sys.zero_state();
        state.positions[1] = y0.clone();
        state.velocities[1] = y1.clone();
        sys.check_state(&state)?;
        Ok(state)
    }

    fn data(&self) -> Result<(SpectralField, SpectralField)> {
        Ok((SpectralField::new(self.y0.clone(), self.length)?, SpectralField::new(self.y1.clone(), self.length)?))
    }

    pub fn control_problem(&self) -> Result<ControlProblem> {
        let (y0, y1) = self.data()?;
        let sys = self.cascade()?;
        let state = self.initial(&y0, &y1)?;
        ControlProblem::new(sys, state, self.horizon, self.dt, vec![self.spec()], ControlVariant::Bounded)
    }

    /// `φ = ½ ∫₀^T ⟨c y, y⟩ dt` for data `(y0, y1)` under `controls`
    /// (trapezoid on the time grid).
    pub fn functional(&self, y0: &SpectralField, y1: &SpectralField, controls: Option<&ObservationSeries>) -> Result<f64> {
        let sys = self.cascade()?;
        time_grid(&sys, self.horizon, self.dt)?;
        let state = self.initial(y0, y1)?;
        let src = controls.map(|v| control_load(&sys, &self.spec(), v)).transpose()?;
        let traj = integrate_controlled(&sys, &state, self.horizon, self.dt, src.as_ref())?;
        let mc = assemble_multiplication(&self.observation, self.modes, self.length)?;
        let mut cy = vec![0.0; self.modes];
        let dens = (0..traj.nodes()).map(|m| {
            let y = traj.component_position(m, 1);
            cy.iter_mut().for_each(|v| *v = 0.0);
            matvec_add(mc.matrix(), y, 1.0, &mut cy);
            0.5 * y.iter().zip(&cy).map(|(a, b)| a * b).sum::<f64>()
        });
        Ok(trapezoid(dens.collect::<Vec<_>>().into_iter(), self.dt))
    }

    /// Centered differences `(∂φ/∂τ₀, ∂φ/∂τ₁)` along `(z0, 0)` and `(0, z1)`.
    pub fn sensitivity(
        &self,
        controls: Option<&ObservationSeries>,
        z0: &SpectralField,
        z1: &SpectralField,
        epsilon: f64,
    ) -> Result<(f64, f64)> {
        let (y0, y1) = self.data()?;
        let shifted = |f: &SpectralField, z: &SpectralField, t: f64| {
            let mut g = f.clone();
            g.axpy(t, z);
            g
        };
        let d0 = (self.functional(&shifted(&y0, z0, epsilon), &y1, controls)?
            - self.functional(&shifted(&y0, z0, -epsilon), &y1, controls)?)
            / (2.0 * epsilon);
        let d1 = (self.functional(&y0, &shifted(&y1, z1, epsilon), controls)?
            - self.functional(&y0, &shifted(&y1, z1, -epsilon), controls)?)
            / (2.0 * epsilon);
        Ok((d0, d1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEntry {
    pub direction: usize,
    pub d_tau0: f64,
    pub d_tau1: f64,
    /// `|∂φ/∂τ| / (2√(φ(y)·φ(z)))`, at most one by Cauchy–Schwarz.
    pub relative_tau0: f64,
    pub relative_tau1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySummary {
    pub phi: f64,
    pub entries: Vec<SensitivityEntry>,
    pub max_relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsensitizingReport {
    pub hum: HumSolution,
    pub epsilon: f64,
    pub seed: u64,
    pub controlled: SensitivitySummary,
    pub uncontrolled: SensitivitySummary,
}

/// Perturbation pair with `|z0|_1 = |z1|_0 = 1`.
pub fn unit_perturbation(seed: u64, direction: u64, modes: usize, length: f64) -> (SpectralField, SpectralField) {
    let mut rng = stream_rng(seed, direction);
    let (z0, _) = random_component(&mut rng, modes, length, 1);
    let (_, z1) = random_component(&mut rng, modes, length, 1);
    (z0.scaled(1.0 / z0.sobolev_norm(1)), z1.scaled(1.0 / z1.sobolev_norm(0)))
}

/// Solves for the insensitizing control and measures the sensitivities
/// with and without it along `directions` random perturbations.
pub fn insensitizing_pipeline(
    problem: &InsensitizingProblem,
    opts: &SolveOptions,
    directions: usize,
    seed: u64,
    epsilon: f64,
) -> Result<InsensitizingReport> {
    if !(epsilon > 0.0) {
        return invalid("finite-difference step must be positive");
    }
    let hum = synthesize(&problem.control_problem()?, opts)?;
    let (y0, y1) = problem.data()?;
    let zero = SpectralField::zeros(problem.modes, problem.length);
    let summarize = |controls: Option<&ObservationSeries>| -> Result<SensitivitySummary> {
        let phi = problem.functional(&y0, &y1, controls)?;
        let mut entries = Vec::with_capacity(directions);
        for d in 0..directions {
            let (z0, z1) = unit_perturbation(seed, d as u64, problem.modes, problem.length);
            let (d0, d1) = problem.sensitivity(controls, &z0, &z1, epsilon)?;
            let phi_z0 = problem.functional(&z0, &zero, None)?;
            let phi_z1 = problem.functional(&zero, &z1, None)?;
            let rel = |d: f64, pz: f64| {
                let s = 2.0 * (phi * pz).sqrt();
                if s > 0.0 {
                    d.abs() / s
                } else {
                    0.0
                }
            };
            entries.push(SensitivityEntry {
                direction: d,
                d_tau0: d0,
                d_tau1: d1,
                relative_tau0: rel(d0, phi_z0),
                relative_tau1: rel(d1, phi_z1),
            });
        }
        let max_relative = entries.iter().map(|e| e.relative_tau0.max(e.relative_tau1)).fold(0.0, f64::max);
        Ok(SensitivitySummary { phi, entries, max_relative })
    };
    let controlled = summarize(Some(&hum.controls[0]))?;
    let uncontrolled = summarize(None)?;
    Ok(InsensitizingReport { hum, epsilon, seed, controlled, uncontrolled })
}
