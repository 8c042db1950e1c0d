//! Time integration of cascade systems in modal coordinates.
//!
//! Each step is a kick-drift-kick splitting: half kicks apply coupling forces
//! and sources, the drift advances the uncoupled modes by the exact rotation
//! `(q, p) ↦ (q cos ωτ + p sin ωτ / ω, -q ω sin ωτ + p cos ωτ)`. The map is
//! symplectic and time-reversible, reproduces free waves exactly and conserves
//! the energies of the first component (which receives no coupling force)
//! to round-off. Sources are sampled at the grid nodes.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeState, CascadeSystem};
use crate::error::{invalid, Error, Result};
use crate::spectral::weighted_norm_sq;

/// Relative tolerance on `T = M·dt`.
pub const GRID_TOLERANCE: f64 = 1e-9;
/// Magic bytes of the binary snapshot format.
pub const SNAPSHOT_MAGIC: &[u8; 8] = b"CASCSNP1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// Which coupling pattern drives the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamics {
    /// `u_i'' + A u_i + Σ_k C_{ik} u_k = 0` (observation system).
    Cascade,
    /// `y_k'' + A y_k + Σ_i C_{ik}^* y_i = B v` (control system).
    Transposed,
}

/// Modal loads `f_i(t_m)` on selected components, sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub modes: usize,
    pub nodes: usize,
    pub terms: Vec<SourceTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTerm {
    /// 0-based component.
    pub component: usize,
    /// `nodes × modes`, node-major.
    pub loads: Vec<f64>,
}

impl SourceSpec {
    pub fn empty(modes: usize, nodes: usize) -> Self {
        Self { modes, nodes, terms: Vec::new() }
    }

    /// `f(t_m) = signal[m] · profile` on one component.
    pub fn separable(component: usize, profile: &[f64], signal: &[f64]) -> Self {
        let modes = profile.len();
        let loads = signal.iter().flat_map(|&s| profile.iter().map(move |&p| s * p)).collect();
        Self { modes, nodes: signal.len(), terms: vec![SourceTerm { component, loads }] }
    }

    pub fn push(&mut self, component: usize, loads: Vec<f64>) -> Result<()> {
        if loads.len() != self.modes * self.nodes {
            return invalid(format!(
                "source term has {} values, expected {} nodes × {} modes",
                loads.len(),
                self.nodes,
                self.modes
            ));
        }
        self.terms.push(SourceTerm { component, loads });
        Ok(())
    }

    /// `out += f(t_node)`, with `out` a flat position-sized vector.
    pub fn add_to(&self, node: usize, out: &mut [f64]) {
        let n = self.modes;
        for t in &self.terms {
            let src = &t.loads[node * n..(node + 1) * n];
            for (o, s) in out[t.component * n..(t.component + 1) * n].iter_mut().zip(src) {
                *o += s;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.loads.iter().all(|&v| v == 0.0))
    }
}

/// Fixed-step propagator for one system, step and horizon.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    sys: &'a CascadeSystem,
    dynamics: Dynamics,
    dt: f64,
    steps: usize,
    omega: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

/// Checks the step bound `dt ≤ 0.5/√λ_N` and `T = M·dt`; returns `M`.
pub fn time_grid(sys: &CascadeSystem, horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return invalid(format!("horizon must be positive, got {horizon}"));
    }
    let lam_max = sys.eigenvalues()[sys.modes() - 1];
    let bound = 0.5 / lam_max.sqrt();
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, bound });
    }
    let steps = (horizon / dt).round();
    if steps < 1.0 || (steps * dt - horizon).abs() > GRID_TOLERANCE * horizon {
        return Err(Error::GridMismatch { horizon, dt });
    }
    Ok(steps as usize)
}

impl<'a> Propagator<'a> {
    pub fn new(sys: &'a CascadeSystem, horizon: f64, dt: f64, dynamics: Dynamics) -> Result<Self> {
        let steps = time_grid(sys, horizon, dt)?;
        let omega: Vec<f64> = sys.eigenvalues().iter().map(|l| l.sqrt()).collect();
        let cos = omega.iter().map(|w| (w * dt).cos()).collect();
        let sin = omega.iter().map(|w| (w * dt).sin()).collect();
        Ok(Self { sys, dynamics, dt, steps, omega, cos, sin })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn system(&self) -> &CascadeSystem {
        self.sys
    }

    fn force(&self, q: &[f64], out: &mut [f64]) {
        match self.dynamics {
            Dynamics::Cascade => self.sys.coupling_force(q, out),
            Dynamics::Transposed => self.sys.coupling_force_transposed(q, out),
        }
    }

    fn has_coupling(&self) -> bool {
        !self.sys.blocks().is_empty()
    }

    fn rotate(&self, q: &mut [f64], p: &mut [f64]) {
        let n = self.omega.len();
        for (j, (qj, pj)) in q.iter_mut().zip(p.iter_mut()).enumerate() {
            let k = j % n;
            let (c, s, w) = (self.cos[k], self.sin[k], self.omega[k]);
            let (a, b) = (*qj, *pj);
            *qj = a * c + b * s / w;
            *pj = -a * w * s + b * c;
        }
    }

    /// Advances `(q, p)` from `t_0` to `t_M`, calling `visit(m, q, p)` at
    /// every node including both ends.
    pub fn run(
        &self,
        q: &mut [f64],
        p: &mut [f64],
        source: Option<&SourceSpec>,
        mut visit: impl FnMut(usize, &[f64], &[f64]),
    ) {
        let h = 0.5 * self.dt;
        let mut kick = vec![0.0; q.len()];
        let coupled = self.has_coupling();
        visit(0, q, p);
        for m in 0..self.steps {
            for half in 0..2 {
                let node = m + half;
                if coupled {
                    self.force(q, &mut kick);
                } else {
                    kick.iter_mut().for_each(|v| *v = 0.0);
                }
                if let Some(src) = source {
                    src.add_to(node, &mut kick);
                }
                if coupled || source.is_some() {
                    for (pj, f) in p.iter_mut().zip(&kick) {
                        *pj += h * f;
                    }
                }
                if half == 0 {
                    self.rotate(q, p);
                }
            }
            visit(m + 1, q, p);
        }
    }

    /// Terminal-value solve by time reflection: `visit` receives nodes in
    /// decreasing order `M, M-1, .., 0` with the true velocities.
    pub fn run_backward(&self, q: &mut [f64], p: &mut [f64], mut visit: impl FnMut(usize, &[f64], &[f64])) {
        p.iter_mut().for_each(|v| *v = -*v);
        let mut pv = vec![0.0; p.len()];
        let steps = self.steps;
        self.run(q, p, None, |m, q, p| {
            for (a, b) in pv.iter_mut().zip(p) {
                *a = -b;
            }
            visit(steps - m, q, &pv);
        });
        p.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Uniform-grid trajectory stored node-major as flat `(q, p)` vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub direction: Direction,
    pub n: usize,
    pub p: usize,
    pub modes: usize,
    pub length: f64,
    data: Vec<f64>,
}

impl Trajectory {
    fn new(sys: &CascadeSystem, dt: f64, steps: usize, direction: Direction) -> Self {
        let cfg = sys.config();
        Self {
            dt,
            direction,
            n: cfg.n,
            p: cfg.p,
            modes: cfg.modes,
            length: cfg.length,
            data: vec![0.0; (steps + 1) * 2 * sys.half_dim()],
        }
    }

    pub fn components(&self) -> usize {
        self.n + self.p
    }

    fn half(&self) -> usize {
        self.components() * self.modes
    }

    pub fn nodes(&self) -> usize {
        self.data.len() / (2 * self.half())
    }

    pub fn steps(&self) -> usize {
        self.nodes() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.nodes()).map(|m| self.time(m)).collect()
    }

    pub fn positions(&self, m: usize) -> &[f64] {
        let h = self.half();
        &self.data[2 * h * m..2 * h * m + h]
    }

    pub fn velocities(&self, m: usize) -> &[f64] {
        let h = self.half();
        &self.data[2 * h * m + h..2 * h * (m + 1)]
    }

    /// Position (or velocity) coefficients of component `i` (0-based).
    pub fn component_position(&self, m: usize, i: usize) -> &[f64] {
        &self.positions(m)[i * self.modes..(i + 1) * self.modes]
    }

    pub fn component_velocity(&self, m: usize, i: usize) -> &[f64] {
        &self.velocities(m)[i * self.modes..(i + 1) * self.modes]
    }

    fn store(&mut self, m: usize, q: &[f64], p: &[f64]) {
        let h = self.half();
        self.data[2 * h * m..2 * h * m + h].copy_from_slice(q);
        self.data[2 * h * m + h..2 * h * (m + 1)].copy_from_slice(p);
    }

    pub fn state(&self, m: usize) -> CascadeState {
        CascadeState::from_flat(self.positions(m), self.velocities(m), self.components(), self.modes, self.length)
    }

    pub fn initial(&self) -> CascadeState {
        self.state(0)
    }

    pub fn terminal(&self) -> CascadeState {
        self.state(self.steps())
    }

    /// `e_k` of component `i` at node `m`.
    pub fn energy(&self, m: usize, i: usize, level: i32) -> f64 {
        0.5 * (weighted_norm_sq(self.component_position(m, i), self.length, level)
            + weighted_norm_sq(self.component_velocity(m, i), self.length, level - 1))
    }

    /// CSV with columns `t, e{k}_u{i}` for the given per-component levels.
    pub fn write_csv(&self, path: &Path, levels: &[i32]) -> Result<()> {
        if levels.len() != self.components() {
            return invalid(format!("{} levels for {} components", levels.len(), self.components()));
        }
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t".to_string()];
        header.extend(levels.iter().enumerate().map(|(i, k)| format!("e{k}_u{}", i + 1)));
        w.write_record(&header)?;
        for m in 0..self.nodes() {
            let mut row = vec![format!("{:.17e}", self.time(m))];
            row.extend((0..self.components()).map(|i| format!("{:.17e}", self.energy(m, i, levels[i]))));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Binary snapshot: magic, `u32` N, n, p, M, `f64` dt, then for every
    /// node the positions followed by the velocities (component-major), all
    /// little endian.
    pub fn write_binary(&self, out: &mut impl Write) -> Result<()> {
        out.write_all(SNAPSHOT_MAGIC)?;
        for v in [self.modes, self.n, self.p, self.steps()] {
            out.write_all(&(v as u32).to_le_bytes())?;
        }
        out.write_all(&self.dt.to_le_bytes())?;
        for v in &self.data {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a snapshot written by [`Trajectory::write_binary`].
    pub fn read_binary(input: &mut impl Read, length: f64) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return invalid("not a trajectory snapshot");
        }
        let mut word = [0u8; 4];
        let mut header = [0usize; 4];
        for h in &mut header {
            input.read_exact(&mut word)?;
            *h = u32::from_le_bytes(word) as usize;
        }
        let [modes, n, p, steps] = header;
        let mut buf = [0u8; 8];
        input.read_exact(&mut buf)?;
        let dt = f64::from_le_bytes(buf);
        let count = (steps + 1) * 2 * (n + p) * modes;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            input.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        Ok(Self { dt, direction: Direction::Forward, n, p, modes, length, data })
    }
}

fn check_source(sys: &CascadeSystem, src: &SourceSpec, steps: usize) -> Result<()> {
    if src.modes != sys.modes() || src.nodes != steps + 1 {
        return invalid(format!(
            "source sampled on {} nodes × {} modes, grid has {} nodes × {} modes",
            src.nodes,
            src.modes,
            steps + 1,
            sys.modes()
        ));
    }
    let first = sys.config().n - 1;
    for t in &src.terms {
        if t.component < first || t.component >= sys.components() {
            return invalid(format!(
                "sources act on components {}..={}, got {}",
                first + 1,
                sys.components(),
                t.component + 1
            ));
        }
    }
    Ok(())
}

fn integrate(
    sys: &CascadeSystem,
    u0: &CascadeState,
    horizon: f64,
    dt: f64,
    source: Option<&SourceSpec>,
    dynamics: Dynamics,
) -> Result<Trajectory> {
    sys.check_state(u0)?;
    let prop = Propagator::new(sys, horizon, dt, dynamics)?;
    if let Some(src) = source {
        check_source(sys, src, prop.steps())?;
    }
    let mut traj = Trajectory::new(sys, dt, prop.steps(), Direction::Forward);
    let (mut q, mut p) = u0.to_flat();
    prop.run(&mut q, &mut p, source, |m, q, p| traj.store(m, q, p));
    Ok(traj)
}

/// Forward solve of the cascade from `U(0) = u0`, with optional sources.
pub fn integrate_forward(
    sys: &CascadeSystem,
    u0: &CascadeState,
    horizon: f64,
    dt: f64,
    source: Option<&SourceSpec>,
) -> Result<Trajectory> {
    integrate(sys, u0, horizon, dt, source, Dynamics::Cascade)
}

/// Forward solve of the transposed (control) system.
pub fn integrate_controlled(
    sys: &CascadeSystem,
    y0: &CascadeState,
    horizon: f64,
    dt: f64,
    source: Option<&SourceSpec>,
) -> Result<Trajectory> {
    integrate(sys, y0, horizon, dt, source, Dynamics::Transposed)
}

/// Terminal-value solve of the cascade from `U(T) = ut`; the returned
/// trajectory is indexed by increasing time.
pub fn integrate_backward(sys: &CascadeSystem, ut: &CascadeState, horizon: f64, dt: f64) -> Result<Trajectory> {
    sys.check_state(ut)?;
    let prop = Propagator::new(sys, horizon, dt, Dynamics::Cascade)?;
    let mut traj = Trajectory::new(sys, dt, prop.steps(), Direction::Backward);
    let (mut q, mut p) = ut.to_flat();
    prop.run_backward(&mut q, &mut p, |m, q, p| traj.store(m, q, p));
    Ok(traj)
}

/// The homogeneous adjoint `W` with `W(T) = wt`; same flow as
/// [`integrate_backward`].
pub fn evolve_adjoint_observability(
    sys: &CascadeSystem,
    wt: &CascadeState,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    integrate_backward(sys, wt, horizon, dt)
}
