//! Level energies `e_k(U_i) = ½(|A^{k/2}u_i|² + |A^{(k-1)/2}u_i'|²)` and
//! sampled estimates of admissibility and observability constants.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cascade::{CascadeConfig, CascadeState, CascadeSystem};
use crate::coefficients::Coefficient;
use crate::error::{invalid, Error, Result};
use crate::evolution::{time_grid, Dynamics, Propagator, SourceSpec, Trajectory};
use crate::observation::{admissibility_integral, ObservationSpec, Observer};
use crate::sampling::{random_component, random_state, stream_rng};
use crate::spectral::{matvec_add, weighted_norm_sq, SpectralField};

/// Denominators below this are reported as unobservable.
pub const UNOBSERVABLE_FLOOR: f64 = 1e-14;

/// `e_k(u, u')`.
pub fn level_energy(u: &SpectralField, v: &SpectralField, level: i32) -> f64 {
    0.5 * (u.sobolev_norm_sq(level) + v.sobolev_norm_sq(level - 1))
}

fn flat_energy(q: &[f64], p: &[f64], length: f64, level: i32) -> f64 {
    0.5 * (weighted_norm_sq(q, length, level) + weighted_norm_sq(p, length, level - 1))
}

/// `Σ_i e_{k_i}(U_i)` over all components.
pub fn total_energy(state: &CascadeState, levels: &[i32]) -> f64 {
    state
        .positions
        .iter()
        .zip(&state.velocities)
        .zip(levels)
        .map(|((u, v), &k)| level_energy(u, v, k))
        .sum()
}

/// SHA-256 of the canonical JSON form of a config.
pub fn config_hash(cfg: &CascadeConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSeries {
    /// 1-based component.
    pub component: usize,
    pub level: i32,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub config_hash: Option<String>,
    pub dt: f64,
    pub horizon: f64,
    pub series: Vec<LedgerSeries>,
}

/// Time series of `e_k(U_i)` for every requested `(i, k)`.
pub fn ledger(traj: &Trajectory, levels: &[Vec<i32>]) -> Result<EnergyLedger> {
    if levels.len() < traj.components() {
        return invalid(format!("{} level lists for {} components", levels.len(), traj.components()));
    }
    let mut series = Vec::new();
    for (i, ks) in levels.iter().take(traj.components()).enumerate() {
        for &k in ks {
            let values = (0..traj.nodes()).map(|m| traj.energy(m, i, k)).collect();
            series.push(LedgerSeries { component: i + 1, level: k, values });
        }
    }
    Ok(EnergyLedger { config_hash: None, dt: traj.dt, horizon: traj.horizon(), series })
}

impl EnergyLedger {
    pub fn with_config_hash(mut self, cfg: &CascadeConfig) -> Self {
        self.config_hash = Some(config_hash(cfg));
        self
    }

    pub fn get(&self, component: usize, level: i32) -> Option<&[f64]> {
        self.series
            .iter()
            .find(|s| s.component == component && s.level == level)
            .map(|s| s.values.as_slice())
    }

    /// `max |e(t) - e(0)| / e(0)` of one series.
    pub fn relative_drift(&self, component: usize, level: i32) -> Option<f64> {
        let v = self.get(component, level)?;
        let e0 = v[0];
        let worst = v.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
        Some(if e0 > 0.0 { worst / e0 } else { worst })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t".to_string()];
        header.extend(self.series.iter().map(|s| format!("e{}_u{}", s.level, s.component)));
        w.write_record(&header)?;
        let nodes = self.series.first().map_or(0, |s| s.values.len());
        for m in 0..nodes {
            let mut row = vec![format!("{:.17e}", m as f64 * self.dt)];
            row.extend(self.series.iter().map(|s| format!("{:.17e}", s.values[m])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `∫₀ᵀ ‖B*U_n‖² dt / Σ_i e_{k_i}(U_i)(0)` on canonical levels.
pub fn observability_ratio(
    sys: &CascadeSystem,
    u0: &CascadeState,
    horizon: f64,
    dt: f64,
    obs: &ObservationSpec,
) -> Result<f64> {
    sys.check_state(u0)?;
    let denom = total_energy(u0, &sys.config().canonical_levels());
    if u0.is_zero() || denom == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let traj = crate::evolution::integrate_forward(sys, u0, horizon, dt, None)?;
    Ok(admissibility_integral(sys, &traj, obs)? / denom)
}

/// A sampled supremum that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimate {
    Finite(f64),
    /// Some sampled datum has positive energy and a vanishing observation.
    Unobservable,
}

impl Estimate {
    pub fn value(&self) -> f64 {
        match self {
            Estimate::Finite(v) => *v,
            Estimate::Unobservable => f64::INFINITY,
        }
    }

    pub fn is_unobservable(&self) -> bool {
        matches!(self, Estimate::Unobservable)
    }

    fn fold(self, numerator: f64, denominator: f64) -> Self {
        match self {
            Estimate::Unobservable => self,
            Estimate::Finite(best) => {
                if denominator < UNOBSERVABLE_FLOOR {
                    if numerator > UNOBSERVABLE_FLOOR {
                        Estimate::Unobservable
                    } else {
                        self
                    }
                } else {
                    Estimate::Finite(best.max(numerator / denominator))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonEstimate {
    pub horizon: f64,
    /// `d̂_{i,n}`: sup `e_{k_i}(U_i)(0) / ∫‖B*U_n‖²`, one entry per component.
    pub d: Vec<Estimate>,
    /// `k̂_{i,n}`: sup `∫ e_{k_i}(U_i) dt / ∫‖B*U_n‖²`.
    pub k: Vec<Estimate>,
    /// `r̂_{n,n}`: sup `∫⟨C_{n,n-1}u_{n-1}, u_{n-1}⟩ dt / ∫‖B*U_n‖²`.
    pub r: Option<Estimate>,
    /// `Ĉ`: sup `∫‖B*U_n‖² / Σ e_{k_i}(U_i)(0)`.
    pub admissibility: f64,
    /// inf `∫‖B*U_n‖² / Σ e_{k_i}(U_i)(0)`.
    pub min_ratio: f64,
    /// Draw attaining `d̂_{n,n}`.
    pub worst_draw: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub horizons: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub dt: f64,
    pub estimates: Vec<HorizonEstimate>,
    /// Least-squares slope of `log d̂_{n,n}` against `log T`.
    pub slope_dnn: Option<f64>,
    /// Draw `s` is supported on components `1..=support_sizes[s]`.
    pub support_sizes: Vec<usize>,
}

impl ObservabilityReport {
    pub fn dnn(&self, n: usize) -> Vec<Estimate> {
        self.estimates.iter().map(|e| e.d[n - 1]).collect()
    }

    pub fn write_csv(&self, path: &Path, n: usize) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let m = self.estimates.first().map_or(0, |e| e.d.len());
        let mut header = vec!["T".to_string()];
        header.extend((1..=m).map(|i| format!("d_{i}_{n}")));
        header.extend((1..=m).map(|i| format!("k_{i}_{n}")));
        header.extend(["r_nn".into(), "admissibility".into(), "min_ratio".into()]);
        w.write_record(&header)?;
        let fmt = |e: &Estimate| match e {
            Estimate::Finite(v) => format!("{v:.17e}"),
            Estimate::Unobservable => "inf".into(),
        };
        for e in &self.estimates {
            let mut row = vec![format!("{:.17e}", e.horizon)];
            row.extend(e.d.iter().map(fmt));
            row.extend(e.k.iter().map(fmt));
            row.push(e.r.as_ref().map_or(String::new(), fmt));
            row.push(format!("{:.17e}", e.admissibility));
            row.push(format!("{:.17e}", e.min_ratio));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-draw integrals at each requested horizon.
struct DrawRecord {
    initial: Vec<f64>,
    total_initial: f64,
    observed: Vec<f64>,
    integrated: Vec<Vec<f64>>,
    coupling: Vec<f64>,
}

/// Monte Carlo estimates of the constants of the observability hierarchy.
///
/// Each draw is one trajectory to `max(T_grid)` with cumulative trapezoid
/// integrals read off at every horizon, so `d̂` is nonincreasing in `T` by
/// construction. Draw `s` is supported on components `1..=1 + s mod m`,
/// which puts data into the necessity-test subspaces as well.
pub fn estimate_constants(
    sys: &CascadeSystem,
    obs: &ObservationSpec,
    horizons: &[f64],
    samples: usize,
    seed: u64,
    dt: f64,
) -> Result<ObservabilityReport> {
    if horizons.is_empty() || samples == 0 {
        return invalid("need a nonempty horizon grid and at least one sample");
    }
    let cfg = sys.config();
    let floor = 2.0 * cfg.length;
    if let Some(t) = horizons.iter().find(|&&t| !(t > floor)) {
        return invalid(format!("horizon {t} is below the time floor 2L = {floor}"));
    }
    let observer = Observer::new(sys, obs)?;
    let t_max = horizons.iter().copied().fold(0.0, f64::max);
    let prop = Propagator::new(sys, t_max, dt, Dynamics::Cascade)?;
    let marks: Vec<usize> = horizons.iter().map(|&t| time_grid(sys, t, dt)).collect::<Result<_>>()?;
    let m = sys.components();
    let levels = cfg.canonical_levels();
    let coupling_block = if cfg.n >= 2 {
        sys.blocks().iter().find(|b| b.row == cfg.n - 1 && b.col == cfg.n - 2).cloned()
    } else {
        None
    };
    let support_sizes: Vec<usize> = (0..samples).map(|s| 1 + s % m).collect();
    let n_modes = sys.modes();
    let length = sys.length();

    let records: Vec<DrawRecord> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, s as u64);
            let support: Vec<bool> = (0..m).map(|i| i < support_sizes[s]).collect();
            let u0 = random_state(&mut rng, sys, &levels, &support);
            let initial: Vec<f64> = (0..m)
                .map(|i| level_energy(&u0.positions[i], &u0.velocities[i], levels[i]))
                .collect();
            let total_initial = initial.iter().sum();

            let mut rec = DrawRecord {
                initial,
                total_initial,
                observed: Vec::with_capacity(marks.len()),
                integrated: Vec::with_capacity(marks.len()),
                coupling: Vec::with_capacity(marks.len()),
            };
            let (mut q, mut p) = u0.to_flat();
            let mut obs_int = 0.0;
            let mut e_int = vec![0.0; m];
            let mut c_int = 0.0;
            let mut prev: Option<(f64, Vec<f64>, f64)> = None;
            let mut scratch = vec![0.0; n_modes];
            let mut next_mark = 0;
            let mut order: Vec<usize> = (0..marks.len()).collect();
            order.sort_by_key(|&j| marks[j]);
            let mut at_marks = vec![(0.0, vec![0.0; m], 0.0); marks.len()];
            prop.run(&mut q, &mut p, None, |node, q, p| {
                let o = observer.norm_sq(q, p);
                let e: Vec<f64> = (0..m)
                    .map(|i| {
                        flat_energy(&q[i * n_modes..(i + 1) * n_modes], &p[i * n_modes..(i + 1) * n_modes], length, levels[i])
                    })
                    .collect();
                let c = coupling_block.as_ref().map_or(0.0, |b| {
                    let w = &q[b.col * n_modes..(b.col + 1) * n_modes];
                    scratch.iter_mut().for_each(|v| *v = 0.0);
                    matvec_add(&b.matrix, w, 1.0, &mut scratch);
                    scratch.iter().zip(w).map(|(a, b)| a * b).sum()
                });
                if let Some((po, pe, pc)) = prev.take() {
                    obs_int += 0.5 * dt * (po + o);
                    for i in 0..m {
                        e_int[i] += 0.5 * dt * (pe[i] + e[i]);
                    }
                    c_int += 0.5 * dt * (pc + c);
                }
                while next_mark < order.len() && marks[order[next_mark]] == node {
                    at_marks[order[next_mark]] = (obs_int, e_int.clone(), c_int);
                    next_mark += 1;
                }
                prev = Some((o, e, c));
            });
            for (o, e, c) in at_marks {
                rec.observed.push(o);
                rec.integrated.push(e);
                rec.coupling.push(c);
            }
            rec
        })
        .collect();

    let n = cfg.n;
    let mut estimates = Vec::with_capacity(horizons.len());
    for (j, &t) in horizons.iter().enumerate() {
        let mut d = vec![Estimate::Finite(0.0); m];
        let mut k = vec![Estimate::Finite(0.0); m];
        let mut r = if n >= 2 { Some(Estimate::Finite(0.0)) } else { None };
        let mut adm = 0.0_f64;
        let mut min_ratio = f64::INFINITY;
        let mut worst = None;
        let mut worst_value = -1.0;
        for (s, rec) in records.iter().enumerate() {
            let o = rec.observed[j];
            for i in 0..m {
                d[i] = d[i].fold(rec.initial[i], o);
                k[i] = k[i].fold(rec.integrated[j][i], o);
            }
            if let Some(r) = r.as_mut() {
                *r = r.fold(rec.coupling[j], o);
            }
            if o >= UNOBSERVABLE_FLOOR {
                let ratio = rec.initial[n - 1] / o;
                if ratio > worst_value {
                    worst_value = ratio;
                    worst = Some(s);
                }
            } else if rec.initial[n - 1] > UNOBSERVABLE_FLOOR && worst_value.is_finite() {
                worst_value = f64::INFINITY;
                worst = Some(s);
            }
            if rec.total_initial > 0.0 {
                adm = adm.max(o / rec.total_initial);
                min_ratio = min_ratio.min(o / rec.total_initial);
            }
        }
        estimates.push(HorizonEstimate { horizon: t, d, k, r, admissibility: adm, min_ratio, worst_draw: worst });
    }

    let pts: Vec<(f64, f64)> = estimates
        .iter()
        .filter_map(|e| match e.d[n - 1] {
            Estimate::Finite(v) if v > 0.0 => Some((e.horizon.ln(), v.ln())),
            _ => None,
        })
        .collect();
    let slope_dnn = (pts.len() >= 2).then(|| least_squares_slope(&pts));

    Ok(ObservabilityReport {
        horizons: horizons.to_vec(),
        samples,
        seed,
        dt,
        estimates,
        slope_dnn,
        support_sizes,
    })
}

/// Slope of the least-squares line through `(x, y)`.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Source `f(t, x) = amplitude · sin(frequency·t + phase) · profile(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InhomogeneousSource {
    pub profile: Coefficient,
    #[serde(default = "unit")]
    pub amplitude: f64,
    #[serde(default = "unit")]
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

fn unit() -> f64 {
    1.0
}

impl InhomogeneousSource {
    pub fn zero() -> Self {
        Self { profile: Coefficient::zero(), amplitude: 0.0, frequency: 1.0, phase: 0.0 }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { amplitude: self.amplitude * factor, ..self.clone() }
    }

    fn modal_profile(&self, modes: usize, length: f64) -> Result<Vec<f64>> {
        let c = self.profile.clone();
        Ok(SpectralField::project(move |x| c.value(x), modes, length)?.into_coeffs())
    }

    fn signal(&self, t: f64) -> f64 {
        self.amplitude * (self.frequency * t + self.phase).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InhomogeneousEstimate {
    pub horizon: f64,
    pub eta0: f64,
    pub alpha0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InhomogeneousReport {
    pub estimates: Vec<InhomogeneousEstimate>,
    /// max/min of `η₀` over the horizon grid.
    pub eta_spread: f64,
    /// max/min of `α₀` over the horizon grid (1 when all vanish).
    pub alpha_spread: f64,
    pub stable: bool,
    /// Every sample satisfies `η₀ O ≥ E - α₀ F` at every horizon.
    pub holds: bool,
}

/// Candidate values of `α`: zero and a log-spaced sweep.
fn alpha_grid() -> Vec<f64> {
    std::iter::once(0.0).chain((0..=120).map(|j| 10f64.powf(-6.0 + j as f64 * 0.1))).collect()
}

/// Smallest-cost pair `(η₀, α₀)` with
/// `η₀ ∫‖B*P‖² ≥ ∫ e₁(P) - α₀ ∫|f|²` over sampled solutions of
/// `p'' + Ap = f`, for each horizon, and its spread across horizons.
///
/// The initial data are drawn at a size proportional to `‖f‖_{L²(0,T;H)}`
/// (unit when `f ≡ 0`), so the estimates are invariant under scaling `f`.
pub fn uniform_inhomogeneous_check(
    cfg: &CascadeConfig,
    obs: &ObservationSpec,
    source: &InhomogeneousSource,
    horizons: &[f64],
    samples: usize,
    seed: u64,
    dt: f64,
) -> Result<InhomogeneousReport> {
    if horizons.is_empty() || samples == 0 {
        return invalid("need a nonempty horizon grid and at least one sample");
    }
    let floor = 2.0 * cfg.length;
    if let Some(t) = horizons.iter().find(|&&t| !(t > floor)) {
        return invalid(format!("horizon {t} is below the time floor 2L = {floor}"));
    }
    let scalar = CascadeConfig::decoupled(1, cfg.length, cfg.modes);
    let sys = CascadeSystem::assemble(&scalar)?;
    let obs = retarget(obs, 1);
    let observer = Observer::new(&sys, &obs)?;
    let profile = source.modal_profile(cfg.modes, cfg.length)?;
    let profile_sq: f64 = profile.iter().map(|a| a * a).sum();

    let mut estimates = Vec::with_capacity(horizons.len());
    let mut holds = true;
    for &t in horizons {
        let prop = Propagator::new(&sys, t, dt, Dynamics::Transposed)?;
        let nodes = prop.steps() + 1;
        let signal: Vec<f64> = (0..nodes).map(|m| source.signal(m as f64 * dt)).collect();
        let src = SourceSpec::separable(0, &profile, &signal);
        let f_norm_sq = crate::observation::trapezoid(signal.iter().map(|g| g * g * profile_sq), dt);
        let scale = if f_norm_sq > 0.0 { f_norm_sq.sqrt() } else { 1.0 };

        let per_sample: Vec<(f64, f64, f64)> = (0..samples)
            .into_par_iter()
            .map(|s| {
                let mut rng = stream_rng(seed, s as u64);
                let (u, v) = random_component(&mut rng, cfg.modes, cfg.length, 1);
                let (mut q, mut p) = (u.scaled(scale).into_coeffs(), v.scaled(scale).into_coeffs());
                let mut e_vals = Vec::with_capacity(nodes);
                let mut o_vals = Vec::with_capacity(nodes);
                prop.run(&mut q, &mut p, Some(&src), |_, q, p| {
                    e_vals.push(flat_energy(q, p, cfg.length, 1));
                    o_vals.push(observer.norm_sq(q, p));
                });
                let e = crate::observation::trapezoid(e_vals.into_iter(), dt);
                let o = crate::observation::trapezoid(o_vals.into_iter(), dt);
                (e, f_norm_sq, o)
            })
            .collect();

        let mean_o = per_sample.iter().map(|s| s.2).sum::<f64>() / samples as f64;
        let mean_f = per_sample.iter().map(|s| s.1).sum::<f64>() / samples as f64;
        let mut best: Option<(f64, f64, f64)> = None;
        for alpha in alpha_grid() {
            let mut eta = 0.0_f64;
            for &(e, f, o) in &per_sample {
                let need = e - alpha * f;
                if o < UNOBSERVABLE_FLOOR {
                    if need > 0.0 {
                        eta = f64::INFINITY;
                    }
                } else {
                    eta = eta.max(need / o);
                }
            }
            let cost = eta * mean_o + alpha * mean_f;
            if best.map_or(true, |b| cost < b.0) {
                best = Some((cost, eta, alpha));
            }
        }
        let (_, eta0, alpha0) = best.expect("alpha grid is nonempty");
        for &(e, f, o) in &per_sample {
            if eta0 * o < e - alpha0 * f - 1e-12 * e.abs().max(1.0) {
                holds = false;
            }
        }
        estimates.push(InhomogeneousEstimate { horizon: t, eta0, alpha0 });
    }

    let spread = |vals: Vec<f64>| -> f64 {
        let max = vals.iter().copied().fold(0.0, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            1.0
        } else if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    };
    let eta_spread = spread(estimates.iter().map(|e| e.eta0).collect());
    let alpha_spread = spread(estimates.iter().map(|e| e.alpha0).collect());
    Ok(InhomogeneousReport {
        estimates,
        eta_spread,
        alpha_spread,
        stable: eta_spread <= 2.0 && alpha_spread <= 2.0,
        holds,
    })
}

fn retarget(obs: &ObservationSpec, target: usize) -> ObservationSpec {
    let mut o = obs.clone();
    match &mut o {
        ObservationSpec::Interior { component, .. } | ObservationSpec::Boundary { component, .. } => *component = target,
    }
    o
}
