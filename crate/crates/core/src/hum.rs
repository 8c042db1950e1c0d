//! HUM control synthesis for cascade systems.
//!
//! The controlled system is the transposed cascade `y'' + Ay + Cᵀy = Σ Oᵀv`
//! with controls `v_c = O_c w_c` read off the adjoint cascade `W` solved
//! backward from terminal data `W^T`. On the discrete grid the identity
//!
//! ```text
//! ⟨y'(T), w(T)⟩ - ⟨y(T), w'(T)⟩ - ⟨y'(0), w(0)⟩ + ⟨y(0), w'(0)⟩ = Σ_m ϖ_m Σ_c ⟨v_c, O_c w_c⟩(t_m)
//! ```
//!
//! holds exactly (trapezoid weights `ϖ_m`), so the Gramian is symmetric and
//! solving `Λ W^T = -ℓ` drives the discrete `Y(T)` to zero up to solver
//! accuracy.
//!
//! Unknowns are solved in coordinates scaled by the natural energy norm of
//! each variant's adjoint space, which keeps the Gramian well conditioned.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeState, CascadeSystem};
use crate::energy::total_energy;
use crate::error::{invalid, Error, Result};
use crate::evolution::{Dynamics, Propagator, SourceSpec, Trajectory};
use crate::observation::{ObservationSeries, ObservationSpec, Observed, Observer};
use crate::spectral::eigenvalue_unchecked;

/// Largest terminal-space dimension assembled densely.
pub const DENSE_CAP: usize = 4000;
/// Relative spectral cutoff separating the observable subspace.
pub const SPECTRAL_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ControlVariant {
    /// Interior controls on every controlled component.
    Bounded,
    /// Boundary controls on every controlled component.
    Unbounded,
    /// Boundary controls on components `n..=n+q`, interior on the rest.
    Mixed { q: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    /// Dense when the dimension allows, CG otherwise.
    Auto,
    Dense,
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: SolverMethod,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 2000, method: SolverMethod::Auto }
    }
}

/// A controllability problem on a fixed grid.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    sys: CascadeSystem,
    y0: CascadeState,
    horizon: f64,
    dt: f64,
    controls: Vec<ObservationSpec>,
    variant: ControlVariant,
    observers: Vec<Observer>,
    /// Terminal data restricted to modes `1..=cutoff`.
    mode_filter: Option<usize>,
    active: Vec<usize>,
    scale: Vec<f64>,
}

impl ControlProblem {
    pub fn new(
        sys: CascadeSystem,
        y0: CascadeState,
        horizon: f64,
        dt: f64,
        controls: Vec<ObservationSpec>,
        variant: ControlVariant,
    ) -> Result<Self> {
        Self::with_filter(sys, y0, horizon, dt, controls, variant, None)
    }

    pub fn with_filter(
        sys: CascadeSystem,
        y0: CascadeState,
        horizon: f64,
        dt: f64,
        controls: Vec<ObservationSpec>,
        variant: ControlVariant,
        mode_filter: Option<usize>,
    ) -> Result<Self> {
        sys.check_state(&y0)?;
        crate::evolution::time_grid(&sys, horizon, dt)?;
        let cfg = sys.config();
        if controls.len() != cfg.p + 1 {
            return invalid(format!("expected {} control specs, got {}", cfg.p + 1, controls.len()));
        }
        for (j, spec) in controls.iter().enumerate() {
            if spec.component() != cfg.n + j {
                return invalid(format!(
                    "control spec {} must act on component {}, got {}",
                    j + 1,
                    cfg.n + j,
                    spec.component()
                ));
            }
            let boundary_expected = match variant {
                ControlVariant::Bounded => false,
                ControlVariant::Unbounded => true,
                ControlVariant::Mixed { q } => {
                    if q > cfg.p {
                        return invalid(format!("mixed split q = {q} exceeds p = {}", cfg.p));
                    }
                    j <= q
                }
            };
            if spec.is_boundary() != boundary_expected {
                return invalid(match variant {
                    ControlVariant::Mixed { q } => format!(
                        "mixed({q}) needs boundary controls on components {}..={} followed by interior controls; component {} breaks this order",
                        cfg.n,
                        cfg.n + q,
                        spec.component()
                    ),
                    _ => format!("control on component {} does not match the {variant:?} variant", spec.component()),
                });
            }
        }
        let observers = controls
            .iter()
            .map(|s| Observer::new(&sys, &s.with_observed(Observed::Position)))
            .collect::<Result<Vec<_>>>()?;

        let (m, n) = (sys.components(), sys.modes());
        let cutoff = match mode_filter {
            Some(0) => return invalid("mode filter must keep at least one mode"),
            Some(k) => k.min(n),
            None => n,
        };
        let levels = adjoint_levels(cfg.n, cfg.p, variant);
        let mut active = Vec::new();
        let mut scale = Vec::new();
        for slot in 0..2 {
            for i in 0..m {
                for k in 0..cutoff {
                    let lam = eigenvalue_unchecked(k + 1, sys.length());
                    let level = levels[i] - slot as i32;
                    active.push(slot * m * n + i * n + k);
                    scale.push(lam.powi(level).sqrt().recip());
                }
            }
        }
        let problem = Self {
            sys,
            y0,
            horizon,
            dt,
            controls,
            variant,
            observers,
            mode_filter: mode_filter.map(|_| cutoff),
            active,
            scale,
        };
        problem.check_space()?;
        Ok(problem)
    }

    pub fn system(&self) -> &CascadeSystem {
        &self.sys
    }

    pub fn initial(&self) -> &CascadeState {
        &self.y0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn controls(&self) -> &[ObservationSpec] {
        &self.controls
    }

    pub fn variant(&self) -> ControlVariant {
        self.variant
    }

    pub fn mode_filter(&self) -> Option<usize> {
        self.mode_filter
    }

    /// Number of terminal-data unknowns.
    pub fn dimension(&self) -> usize {
        self.active.len()
    }

    /// Same problem with different initial data.
    pub fn with_initial(&self, y0: CascadeState) -> Result<Self> {
        self.sys.check_state(&y0)?;
        let mut p = self.clone();
        p.y0 = y0;
        p.check_space()?;
        Ok(p)
    }

    /// Natural energy levels of the adjoint components.
    pub fn adjoint_levels(&self) -> Vec<i32> {
        let cfg = self.sys.config();
        adjoint_levels(cfg.n, cfg.p, self.variant)
    }

    /// Natural energy levels of the controlled components (dual ladder).
    pub fn state_levels(&self) -> Vec<i32> {
        self.adjoint_levels().into_iter().map(|k| 1 - k).collect()
    }

    /// Energy of `y` on the dual ladder.
    pub fn natural_energy(&self, y: &CascadeState) -> f64 {
        total_energy(y, &self.state_levels())
    }

    fn check_space(&self) -> Result<()> {
        let e = self.natural_energy(&self.y0);
        if !e.is_finite() {
            return Err(Error::SpaceViolation(format!(
                "initial data has infinite norm on levels {:?}",
                self.state_levels()
            )));
        }
        Ok(())
    }

    fn half(&self) -> usize {
        self.sys.half_dim()
    }

    fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; 2 * self.half()];
        for (&j, &v) in self.active.iter().zip(x) {
            full[j] = v;
        }
        full
    }

    fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.active.iter().map(|&j| full[j]).collect()
    }

    /// Backward adjoint from flat terminal data; returns the controls
    /// `v_c(t_m) = O_c w_c(t_m)` and the state at `t = 0`.
    fn adjoint_controls(&self, terminal: &[f64]) -> Result<(Vec<ObservationSeries>, Vec<f64>)> {
        let h = self.half();
        let prop = Propagator::new(&self.sys, self.horizon, self.dt, Dynamics::Cascade)?;
        let nodes = prop.steps() + 1;
        let mut series: Vec<ObservationSeries> = self
            .observers
            .iter()
            .map(|o| ObservationSeries::zeros(self.dt, nodes, o.output_dim()))
            .collect();
        let (mut q, mut p) = (terminal[..h].to_vec(), terminal[h..].to_vec());
        prop.run_backward(&mut q, &mut p, |m, q, p| {
            for (obs, s) in self.observers.iter().zip(series.iter_mut()) {
                obs.apply(q, p, &mut s.values[m]);
            }
        });
        q.extend(p);
        Ok((series, q))
    }

    fn source_for(&self, controls: &[ObservationSeries]) -> Result<SourceSpec> {
        let nodes = controls.first().map_or(0, ObservationSeries::nodes);
        let mut src = SourceSpec::empty(self.sys.modes(), nodes);
        for (obs, v) in self.observers.iter().zip(controls) {
            src.push(obs.component(), obs.load_series(v))?;
        }
        Ok(src)
    }

    /// Terminal state of the controlled system from `y0` under `controls`.
    fn controlled_terminal(&self, y0: &[f64], controls: Option<&[ObservationSeries]>) -> Result<Vec<f64>> {
        let h = self.half();
        let prop = Propagator::new(&self.sys, self.horizon, self.dt, Dynamics::Transposed)?;
        let src = controls.map(|c| self.source_for(c)).transpose()?;
        let (mut q, mut p) = (y0[..h].to_vec(), y0[h..].to_vec());
        prop.run(&mut q, &mut p, src.as_ref(), |_, _, _| {});
        q.extend(p);
        Ok(q)
    }

    /// `(y'(T), -y(T))`: the vector representing `Y(T)` under the pairing
    /// `⟨y', w⟩ - ⟨y, w'⟩`.
    fn representative(&self, y: &[f64]) -> Vec<f64> {
        let h = self.half();
        let mut r = Vec::with_capacity(2 * h);
        r.extend_from_slice(&y[h..]);
        r.extend(y[..h].iter().map(|v| -v));
        r
    }

    /// `Λ x` on the active unknowns.
    fn gramian_flat(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (controls, _) = self.adjoint_controls(&self.expand(x))?;
        let zero = vec![0.0; 2 * self.half()];
        let y = self.controlled_terminal(&zero, Some(&controls))?;
        Ok(self.restrict(&self.representative(&y)))
    }

    /// `ℓ` from one free forward solve of the controlled system.
    fn linear_form_flat(&self) -> Result<Vec<f64>> {
        let y = self.controlled_terminal(&self.y0.to_vector(), None)?;
        Ok(self.restrict(&self.representative(&y)))
    }
}

fn adjoint_levels(n: usize, p: usize, variant: ControlVariant) -> Vec<i32> {
    let n_i = n as i32;
    (1..=n + p)
        .map(|i| {
            let i_i = i as i32;
            match variant {
                ControlVariant::Bounded => {
                    if i <= n {
                        i_i - n_i
                    } else {
                        0
                    }
                }
                ControlVariant::Unbounded => {
                    if i <= n {
                        1 + i_i - n_i
                    } else {
                        1
                    }
                }
                ControlVariant::Mixed { q } => {
                    if i <= n {
                        1 + i_i - n_i
                    } else if i - n <= q {
                        1
                    } else {
                        0
                    }
                }
            }
        })
        .collect()
}

/// Euclidean pairing of two states' coefficient vectors.
pub fn pairing(a: &CascadeState, b: &CascadeState) -> f64 {
    a.to_vector().iter().zip(b.to_vector()).map(|(x, y)| x * y).sum()
}

/// `Λ(W^T, ·)` represented as a state: applying [`pairing`] with any `W̃^T`
/// gives `Λ(W^T, W̃^T) = ∫ Σ_c ⟨O_c w_c, O_c w̃_c⟩ dt`.
pub fn gramian_apply(problem: &ControlProblem, wt: &CascadeState) -> Result<CascadeState> {
    problem.sys.check_state(wt)?;
    let x = problem.restrict(&wt.to_vector());
    let out = problem.expand(&problem.gramian_flat(&x)?);
    Ok(CascadeState::from_vector(&out, problem.sys.components(), problem.sys.modes(), problem.sys.length()))
}

/// `ℒ(W^T) = Σ_k ⟨y¹_k, w_k(0)⟩ - ⟨y⁰_k, w_k'(0)⟩` for each basis datum, by
/// backward solves.
pub fn assemble_linear_form(problem: &ControlProblem, basis: &[CascadeState]) -> Result<Vec<f64>> {
    let h = problem.half();
    let (y0q, y0p) = problem.y0.to_flat();
    basis
        .par_iter()
        .map(|wt| {
            problem.sys.check_state(wt)?;
            let (_, w0) = problem.adjoint_controls(&wt.to_vector())?;
            let a: f64 = y0p.iter().zip(&w0[..h]).map(|(y, w)| y * w).sum();
            let b: f64 = y0q.iter().zip(&w0[h..]).map(|(y, w)| y * w).sum();
            Ok(a - b)
        })
        .collect()
}

/// `ℓ` on the active unknowns via the forward route; equals
/// [`assemble_linear_form`] on the unit basis.
pub fn linear_form(problem: &ControlProblem) -> Result<Vec<f64>> {
    problem.linear_form_flat()
}

/// Unit terminal data for active unknown `j`.
pub fn basis_state(problem: &ControlProblem, j: usize) -> CascadeState {
    let mut full = vec![0.0; 2 * problem.half()];
    full[problem.active[j]] = 1.0;
    CascadeState::from_vector(&full, problem.sys.components(), problem.sys.modes(), problem.sys.length())
}

#[derive(Debug, Clone)]
pub struct DenseGramian {
    /// `Λ` in Euclidean coordinates of the active unknowns (symmetrized).
    pub matrix: DMatrix<f64>,
    /// `SΛS` with `S` the natural-norm scaling.
    pub scaled: DMatrix<f64>,
    /// `max |Λ - Λᵀ| / max |Λ|` before symmetrization.
    pub asymmetry: f64,
    /// Eigenvalues of the scaled Gramian, ascending.
    pub eigenvalues: Vec<f64>,
    /// Active-unknown indices as flat state positions.
    pub unknowns: Vec<usize>,
}

impl DenseGramian {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Rows/columns belonging to the given 0-based component.
    pub fn component_indices(&self, component: usize, components: usize, modes: usize) -> Vec<usize> {
        let half = components * modes;
        self.unknowns
            .iter()
            .enumerate()
            .filter(|(_, &u)| (u % half) / modes == component)
            .map(|(j, _)| j)
            .collect()
    }

    /// Eigenvalues of the principal submatrix of `Λ` on `indices`.
    pub fn block_eigenvalues(&self, indices: &[usize]) -> Vec<f64> {
        let b = DMatrix::from_fn(indices.len(), indices.len(), |r, c| self.matrix[(indices[r], indices[c])]);
        let mut e: Vec<f64> = SymmetricEigen::new(b).eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.total_cmp(b));
        e
    }
}

/// Full Gramian, one column per active unknown (columns in parallel).
pub fn dense_gramian(problem: &ControlProblem) -> Result<DenseGramian> {
    let d = problem.dimension();
    if d > DENSE_CAP {
        return Err(Error::TooLarge { dimension: d, cap: DENSE_CAP });
    }
    let columns: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            problem.gramian_flat(&e)
        })
        .collect::<Result<_>>()?;
    let raw = DMatrix::from_fn(d, d, |r, c| columns[c][r]);
    let scale_max = raw.amax().max(f64::MIN_POSITIVE);
    let asymmetry = (&raw - raw.transpose()).amax() / scale_max;
    let matrix = (&raw + raw.transpose()) * 0.5;
    let s = &problem.scale;
    let scaled = DMatrix::from_fn(d, d, |r, c| s[r] * matrix[(r, c)] * s[c]);
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(scaled.clone()).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.total_cmp(b));
    Ok(DenseGramian { matrix, scaled, asymmetry, eigenvalues, unknowns: problem.active.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodUsed {
    Dense,
    Cg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub method: MethodUsed,
    pub iterations: usize,
    /// Relative residual of the scaled linear system.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumSolution {
    pub adjoint_terminal: CascadeState,
    /// One signal per control spec, sampled on the time grid.
    pub controls: Vec<ObservationSeries>,
    pub solver: SolverInfo,
    /// Natural-level energy of `Y(T)` after re-simulation.
    pub terminal_residual: f64,
    /// Natural-level energy of `Y(0)`.
    pub initial_energy: f64,
    /// `∫ Σ_c ‖v_c‖² dt`.
    pub control_energy: f64,
    /// `(min, max)` eigenvalue of the scaled Gramian, dense mode only.
    pub gramian_conditioning: Option<(f64, f64)>,
    /// Directions dropped by the spectral cutoff.
    pub uncontrolled_dimension: usize,
    pub dimension: usize,
    pub tolerance: f64,
    pub success: bool,
}

impl HumSolution {
    pub fn relative_residual(&self) -> f64 {
        if self.initial_energy > 0.0 {
            self.terminal_residual / self.initial_energy
        } else {
            self.terminal_residual
        }
    }
}

/// Preconditioned CG on `SΛS z = b`; returns `(z, iterations, relative residual)`.
fn pcg(
    problem: &ControlProblem,
    b: &[f64],
    diag: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    let s = &problem.scale;
    let apply = |z: &[f64]| -> Result<Vec<f64>> {
        let x: Vec<f64> = z.iter().zip(s).map(|(a, b)| a * b).collect();
        Ok(problem.gramian_flat(&x)?.iter().zip(s).map(|(a, b)| a * b).collect())
    };
    let precond = |r: &[f64]| -> Vec<f64> {
        match diag {
            Some(d) => r.iter().zip(d).map(|(a, b)| if *b > 0.0 { a / b } else { *a }).collect(),
            None => r.to_vec(),
        }
    };
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let d = b.len();
    let b_norm = dot(b, b).sqrt();
    let mut z = vec![0.0; d];
    if b_norm == 0.0 {
        return Ok((z, 0, 0.0));
    }
    let mut r = b.to_vec();
    let mut y = precond(&r);
    let mut dir = y.clone();
    let mut ry = dot(&r, &y);
    let mut rel = 1.0;
    for it in 1..=max_iter {
        let ad = apply(&dir)?;
        let curv = dot(&dir, &ad);
        if !(curv > 0.0) {
            return Ok((z, it, rel));
        }
        let alpha = ry / curv;
        for j in 0..d {
            z[j] += alpha * dir[j];
            r[j] -= alpha * ad[j];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= tol {
            return Ok((z, it, rel));
        }
        y = precond(&r);
        let ry_next = dot(&r, &y);
        let beta = ry_next / ry;
        ry = ry_next;
        for j in 0..d {
            dir[j] = y[j] + beta * dir[j];
        }
    }
    Ok((z, max_iter, rel))
}

/// Solves the HUM system and verifies steering; never fails on
/// non-controllability, which is reported through `success`.
pub fn synthesize(problem: &ControlProblem, opts: &SolveOptions) -> Result<HumSolution> {
    if !(opts.tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    let d = problem.dimension();
    let initial_energy = problem.natural_energy(&problem.y0);
    let s = &problem.scale;
    let ell = problem.linear_form_flat()?;
    let rhs: Vec<f64> = ell.iter().zip(s).map(|(l, s)| -l * s).collect();

    let use_dense = match opts.method {
        SolverMethod::Dense => true,
        SolverMethod::Cg => false,
        SolverMethod::Auto => d <= DENSE_CAP,
    };
    let (z, info, conditioning, dropped) = if use_dense {
        let g = dense_gramian(problem)?;
        let eig = SymmetricEigen::new(g.scaled.clone());
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let cut = SPECTRAL_CUTOFF * top;
        let mut z = vec![0.0; d];
        let mut dropped = 0;
        for (k, &mu) in eig.eigenvalues.iter().enumerate() {
            if mu <= cut {
                dropped += 1;
                continue;
            }
            let u = eig.eigenvectors.column(k);
            let coef: f64 = u.iter().zip(&rhs).map(|(a, b)| a * b).sum::<f64>() / mu;
            for (zj, uj) in z.iter_mut().zip(u.iter()) {
                *zj += coef * uj;
            }
        }
        let az = &g.scaled * nalgebra::DVector::from_column_slice(&z);
        let rn: f64 = az.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
        let residual = if bn > 0.0 { rn / bn } else { 0.0 };
        (
            z,
            SolverInfo { method: MethodUsed::Dense, iterations: 0, residual },
            Some((g.min_eigenvalue(), g.max_eigenvalue())),
            dropped,
        )
    } else {
        let (z, iterations, residual) = pcg(problem, &rhs, None, opts.tol, opts.max_iter)?;
        (z, SolverInfo { method: MethodUsed::Cg, iterations, residual }, None, 0)
    };

    let x: Vec<f64> = z.iter().zip(s).map(|(a, b)| a * b).collect();
    let terminal = problem.expand(&x);
    let (controls, _) = problem.adjoint_controls(&terminal)?;
    let control_energy = controls.iter().map(ObservationSeries::energy).sum();
    let yt = problem.controlled_terminal(&problem.y0.to_vector(), Some(&controls))?;
    let (m, n, l) = (problem.sys.components(), problem.sys.modes(), problem.sys.length());
    let terminal_residual = problem.natural_energy(&CascadeState::from_vector(&yt, m, n, l));
    let converged = info.residual <= opts.tol || use_dense;
    let success = converged && terminal_residual <= 100.0 * opts.tol * initial_energy;
    Ok(HumSolution {
        adjoint_terminal: CascadeState::from_vector(&terminal, m, n, l),
        controls,
        solver: info,
        terminal_residual,
        initial_energy,
        control_energy,
        gramian_conditioning: conditioning,
        uncontrolled_dimension: dropped,
        dimension: d,
        tolerance: opts.tol,
        success,
    })
}

/// [`synthesize`], with failure to steer reported as `NotControllable`.
pub fn solve_hum(problem: &ControlProblem, opts: &SolveOptions) -> Result<HumSolution> {
    let sol = synthesize(problem, opts)?;
    if sol.success {
        return Ok(sol);
    }
    let reason = if sol.solver.method == MethodUsed::Cg && sol.solver.residual > opts.tol {
        format!(
            "CG stalled at relative residual {:.3e} after {} iterations",
            sol.solver.residual, sol.solver.iterations
        )
    } else {
        format!(
            "terminal energy {:.3e} exceeds {:.1e} × initial {:.3e} ({} unobservable directions)",
            sol.terminal_residual,
            100.0 * opts.tol,
            sol.initial_energy,
            sol.uncontrolled_dimension
        )
    };
    Err(Error::NotControllable { horizon: problem.horizon, reason })
}

/// Forward run of the controlled system from the problem's initial data
/// under given control signals; used for independent verification.
pub fn simulate_controlled(problem: &ControlProblem, controls: &[ObservationSeries]) -> Result<Trajectory> {
    let src = problem.source_for(controls)?;
    crate::evolution::integrate_controlled(&problem.sys, &problem.y0, problem.horizon, problem.dt, Some(&src))
}
