//! Cascade structure: bi-diagonal `n`-systems and mixed `(n+p)`-systems
//!
//! ```text
//! u_1'' + A u_1                         = 0
//! u_i'' + A u_i + C_{i,i-1} u_{i-1}     = 0        2 ≤ i ≤ n
//! u_i'' + A u_i + Σ_{k=n-1}^{i-1} C_{ik} u_k = 0   n < i ≤ n+p
//! ```
//!
//! with `C_{ik}` multiplication by a coefficient. Component indices are
//! 1-based in configs and reports and 0-based in storage.

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize};

use crate::coefficients::Coefficient;
use crate::error::{invalid, Error, Hypothesis, Result};
use crate::spectral::{assemble_multiplication, eigenvalues, matvec_add, matvec_transpose_add, SpectralField};

/// Grid size used to sample couplings in [`validate_hypotheses`].
pub const VALIDATION_GRID: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubdiagonalCoupling {
    /// Equation index `i` in `2..=n`; the coupling is `c_{i,i-1}`.
    pub row: usize,
    pub coefficient: Coefficient,
    /// Coupling region `O_i`.
    pub region: (f64, f64),
    /// Coercivity margin; defaults to the grid infimum of `c` over `O_i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Bound constant; defaults to the grid supremum of `c`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffdiagonalCoupling {
    /// Equation index `i` in `n+1..=n+p`.
    pub row: usize,
    /// Source component `k` in `n-1..=i-1`.
    pub col: usize,
    pub coefficient: Coefficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    pub n: usize,
    #[serde(default)]
    pub p: usize,
    #[serde(deserialize_with = "deserialize_length")]
    pub length: f64,
    pub modes: usize,
    #[serde(default)]
    pub subdiagonal: Vec<SubdiagonalCoupling>,
    #[serde(default)]
    pub offdiagonal: Vec<OffdiagonalCoupling>,
}

/// Accepts a number, or a multiple of π written as `"pi"`, `"2pi"` or `"0.5*pi"`.
pub fn deserialize_length<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Len {
        Num(f64),
        Text(String),
    }
    match Len::deserialize(d)? {
        Len::Num(v) => Ok(v),
        Len::Text(s) => parse_pi_multiple(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("cannot read length '{s}'"))),
    }
}

pub(crate) fn parse_pi_multiple(s: &str) -> Option<f64> {
    let t = s.trim().to_ascii_lowercase();
    let head = t.strip_suffix("pi")?.trim_end_matches('*').trim();
    let factor = if head.is_empty() { 1.0 } else { head.parse::<f64>().ok()? };
    Some(factor * std::f64::consts::PI)
}

impl CascadeConfig {
    /// Decoupled `n`-system with every `c_{i,i-1} ≡ 0`.
    pub fn decoupled(n: usize, length: f64, modes: usize) -> Self {
        let region = (0.25 * length, 0.75 * length);
        Self {
            n,
            p: 0,
            length,
            modes,
            subdiagonal: (2..=n)
                .map(|row| SubdiagonalCoupling {
                    row,
                    coefficient: Coefficient::zero(),
                    region,
                    alpha: None,
                    beta: None,
                })
                .collect(),
            offdiagonal: Vec::new(),
        }
    }

    /// Bi-diagonal `n`-system with the same coupling on every row.
    pub fn uniform(n: usize, length: f64, modes: usize, coefficient: Coefficient, region: (f64, f64)) -> Self {
        let mut cfg = Self::decoupled(n, length, modes);
        for s in &mut cfg.subdiagonal {
            s.coefficient = coefficient.clone();
            s.region = region;
        }
        cfg
    }

    pub fn components(&self) -> usize {
        self.n + self.p
    }

    /// Structural checks: counts, index pattern and coefficient sanity.
    pub fn check_structure(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("n must be at least 1");
        }
        if self.n == 1 && self.p > 0 {
            return invalid("mixed systems need n >= 2");
        }
        if self.modes == 0 {
            return invalid("truncation order must be at least 1");
        }
        if !(self.length > 0.0) || !self.length.is_finite() {
            return invalid(format!("interval length must be positive, got {}", self.length));
        }
        if self.subdiagonal.len() != self.n - 1 {
            return invalid(format!(
                "expected {} subdiagonal couplings, got {}",
                self.n - 1,
                self.subdiagonal.len()
            ));
        }
        let mut seen = vec![false; self.n + 1];
        for s in &self.subdiagonal {
            if s.row < 2 || s.row > self.n {
                return invalid(format!("subdiagonal row {} outside 2..={}", s.row, self.n));
            }
            if std::mem::replace(&mut seen[s.row], true) {
                return invalid(format!("duplicate subdiagonal row {}", s.row));
            }
            s.coefficient.validate(self.length)?;
        }
        let m = self.components();
        let mut pairs = Vec::new();
        for o in &self.offdiagonal {
            if o.row <= self.n || o.row > m {
                return invalid(format!(
                    "coupling ({}, {}): rows below {} belong to the bi-diagonal part",
                    o.row,
                    o.col,
                    self.n + 1
                ));
            }
            if o.col + 1 < self.n || o.col >= o.row {
                return invalid(format!(
                    "coupling ({}, {}) outside the cascade pattern: column must lie in {}..={}",
                    o.row,
                    o.col,
                    self.n - 1,
                    o.row - 1
                ));
            }
            if pairs.contains(&(o.row, o.col)) {
                return invalid(format!("duplicate coupling ({}, {})", o.row, o.col));
            }
            pairs.push((o.row, o.col));
            o.coefficient.validate(self.length)?;
        }
        Ok(())
    }

    /// Canonical energy level of component `i` (1-based): `1 + i - n` on the
    /// cascade, `1` on the extra rows.
    pub fn canonical_level(&self, i: usize) -> i32 {
        if i <= self.n {
            1 + i as i32 - self.n as i32
        } else {
            1
        }
    }

    pub fn canonical_levels(&self) -> Vec<i32> {
        (1..=self.components()).map(|i| self.canonical_level(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingCheck {
    pub row: usize,
    pub region: (f64, f64),
    pub alpha: f64,
    pub beta: f64,
    pub nonnegative: bool,
    /// `c ≥ α > 0` on the region.
    pub coercive: bool,
    /// `0 ≤ c ≤ β`, the pointwise form of `|Cw|² ≤ β⟨Cw, w⟩`.
    pub bounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub couplings: Vec<CouplingCheck>,
    pub structure_ok: bool,
    pub passed: bool,
}

/// Samples every `c_{i,i-1}` on a uniform grid and checks sign, partial
/// coercivity on `O_i` and the bound constant.
pub fn validate_hypotheses(cfg: &CascadeConfig) -> Result<ValidationReport> {
    cfg.check_structure()?;
    let l = cfg.length;
    let grid: Vec<f64> = (0..VALIDATION_GRID).map(|j| l * j as f64 / (VALIDATION_GRID - 1) as f64).collect();
    let mut couplings = Vec::with_capacity(cfg.subdiagonal.len());
    let mut rows: Vec<&SubdiagonalCoupling> = cfg.subdiagonal.iter().collect();
    rows.sort_by_key(|s| s.row);
    for s in rows {
        let (a, b) = s.region;
        if !(a.is_finite() && b.is_finite()) || !(b > a) || a < 0.0 || b > l {
            return Err(Error::HypothesisViolation {
                hypothesis: Hypothesis::A3,
                detail: format!("coupling region O_{} = ({a}, {b}) is not a nonempty subinterval of (0, {l})", s.row),
            });
        }
        let values: Vec<f64> = grid.iter().map(|&x| s.coefficient.value(x)).collect();
        if let Some((j, v)) = values.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::HypothesisViolation {
                hypothesis: Hypothesis::A2,
                detail: format!("c_{},{} = {v} < 0 at x = {}", s.row, s.row - 1, grid[j]),
            });
        }
        let sup = values.iter().copied().fold(0.0, f64::max);
        let inf_on = grid
            .iter()
            .zip(&values)
            .filter(|(x, _)| **x > a && **x < b)
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min);
        let inf_on = if inf_on.is_finite() { inf_on } else { s.coefficient.value(0.5 * (a + b)) };
        let alpha = s.alpha.unwrap_or(inf_on);
        let beta = s.beta.unwrap_or(sup);
        couplings.push(CouplingCheck {
            row: s.row,
            region: s.region,
            alpha,
            beta,
            nonnegative: true,
            coercive: alpha > 0.0 && inf_on >= alpha,
            bounded: sup <= beta,
        });
    }
    let passed = couplings.iter().all(|c| c.nonnegative && c.coercive && c.bounded);
    Ok(ValidationReport { couplings, structure_ok: true, passed })
}

/// One assembled coupling block `C_{row,col}` (0-based).
#[derive(Debug, Clone)]
pub struct CouplingBlock {
    pub row: usize,
    pub col: usize,
    pub matrix: DMatrix<f64>,
}

/// A configuration with its modal operators assembled.
#[derive(Debug, Clone)]
pub struct CascadeSystem {
    cfg: CascadeConfig,
    eigenvalues: Vec<f64>,
    blocks: Vec<CouplingBlock>,
}

impl CascadeSystem {
    pub fn assemble(cfg: &CascadeConfig) -> Result<Self> {
        cfg.check_structure()?;
        let (n, l) = (cfg.modes, cfg.length);
        let mut entries: Vec<(usize, usize, &Coefficient)> = cfg
            .subdiagonal
            .iter()
            .map(|s| (s.row - 1, s.row - 2, &s.coefficient))
            .chain(cfg.offdiagonal.iter().map(|o| (o.row - 1, o.col - 1, &o.coefficient)))
            .collect();
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut blocks = Vec::new();
        for (row, col, c) in entries {
            if c.is_identically_zero() {
                continue;
            }
            let op = assemble_multiplication(c, n, l)?;
            blocks.push(CouplingBlock { row, col, matrix: op.matrix().clone() });
        }
        Ok(Self { cfg: cfg.clone(), eigenvalues: eigenvalues(n, l), blocks })
    }

    pub fn config(&self) -> &CascadeConfig {
        &self.cfg
    }

    pub fn modes(&self) -> usize {
        self.cfg.modes
    }

    pub fn components(&self) -> usize {
        self.cfg.components()
    }

    pub fn length(&self) -> f64 {
        self.cfg.length
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn blocks(&self) -> &[CouplingBlock] {
        &self.blocks
    }

    /// Length of a flat position (or velocity) vector.
    pub fn half_dim(&self) -> usize {
        self.components() * self.modes()
    }

    /// `out = -Σ_k C_{ik} q_k` for every `i` (observation system).
    pub fn coupling_force(&self, q: &[f64], out: &mut [f64]) {
        let n = self.modes();
        out.iter_mut().for_each(|v| *v = 0.0);
        for b in &self.blocks {
            let src = &q[b.col * n..(b.col + 1) * n];
            matvec_add(&b.matrix, src, -1.0, &mut out[b.row * n..(b.row + 1) * n]);
        }
    }

    /// `out = -Σ_i C_{ik}^* q_i` for every `k` (transposed, control system).
    pub fn coupling_force_transposed(&self, q: &[f64], out: &mut [f64]) {
        let n = self.modes();
        out.iter_mut().for_each(|v| *v = 0.0);
        for b in &self.blocks {
            let src = &q[b.row * n..(b.row + 1) * n];
            matvec_transpose_add(&b.matrix, src, -1.0, &mut out[b.col * n..(b.col + 1) * n]);
        }
    }

    pub fn zero_state(&self) -> CascadeState {
        let z = SpectralField::zeros(self.modes(), self.length());
        let m = self.components();
        CascadeState { positions: vec![z.clone(); m], velocities: vec![z; m] }
    }

    pub fn check_state(&self, u: &CascadeState) -> Result<()> {
        let m = self.components();
        if u.positions.len() != m || u.velocities.len() != m {
            return Err(Error::InvalidState(format!(
                "state has {}+{} fields, system has {m} components",
                u.positions.len(),
                u.velocities.len()
            )));
        }
        for f in u.positions.iter().chain(&u.velocities) {
            if f.truncation() != self.modes() || f.length() != self.length() {
                return Err(Error::InvalidState(format!(
                    "field with N = {}, L = {} does not match N = {}, L = {}",
                    f.truncation(),
                    f.length(),
                    self.modes(),
                    self.length()
                )));
            }
        }
        Ok(())
    }

    /// `𝒜U`: position slots take the velocities, velocity slot `i` takes
    /// `-A u_i - Σ_k C_{ik} u_k`.
    pub fn apply_first_order(&self, u: &CascadeState) -> Result<CascadeState> {
        self.check_state(u)?;
        let (q, p) = u.to_flat();
        let mut force = vec![0.0; q.len()];
        self.coupling_force(&q, &mut force);
        let n = self.modes();
        for (j, f) in force.iter_mut().enumerate() {
            *f -= self.eigenvalues[j % n] * q[j];
        }
        Ok(CascadeState::from_flat(&p, &force, self.components(), n, self.length()))
    }

    /// `𝒜^{-1}U` by the forward recursion
    /// `w_i = -A^{-1}(u_i' + Σ_{k<i} C_{ik} w_k)`, `w_i' = u_i`.
    pub fn apply_inverse_first_order(&self, u: &CascadeState) -> Result<CascadeState> {
        self.check_state(u)?;
        let (q, p) = u.to_flat();
        let n = self.modes();
        let mut w = vec![0.0; q.len()];
        let mut next = 0;
        for i in 0..self.components() {
            let mut rhs = p[i * n..(i + 1) * n].to_vec();
            while next < self.blocks.len() && self.blocks[next].row == i {
                let b = &self.blocks[next];
                let (head, _) = w.split_at(i * n);
                matvec_add(&b.matrix, &head[b.col * n..(b.col + 1) * n], 1.0, &mut rhs);
                next += 1;
            }
            for (k, r) in rhs.iter().enumerate() {
                w[i * n + k] = -r / self.eigenvalues[k];
            }
        }
        Ok(CascadeState::from_flat(&w, &q, self.components(), n, self.length()))
    }

    /// `W^0 = U, W^{j+1} = 𝒜^{-1} W^j` for `j < l`.
    pub fn iterate_inverse(&self, u: &CascadeState, l: usize) -> Result<Vec<CascadeState>> {
        if l == 0 {
            return invalid("iteration count must be at least 1");
        }
        let mut out = Vec::with_capacity(l + 1);
        out.push(u.clone());
        for j in 0..l {
            let next = self.apply_inverse_first_order(&out[j])?;
            out.push(next);
        }
        Ok(out)
    }
}

/// `(u_1..u_m, u_1'..u_m')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeState {
    pub positions: Vec<SpectralField>,
    pub velocities: Vec<SpectralField>,
}

impl CascadeState {
    pub fn components(&self) -> usize {
        self.positions.len()
    }

    /// Flat `(q, p)`: component `i`, mode `k` sits at `i·N + k`.
    pub fn to_flat(&self) -> (Vec<f64>, Vec<f64>) {
        let q = self.positions.iter().flat_map(|f| f.coeffs().iter().copied()).collect();
        let p = self.velocities.iter().flat_map(|f| f.coeffs().iter().copied()).collect();
        (q, p)
    }

    pub fn from_flat(q: &[f64], p: &[f64], components: usize, modes: usize, length: f64) -> Self {
        debug_assert_eq!(q.len(), components * modes);
        debug_assert_eq!(p.len(), components * modes);
        let split = |v: &[f64]| -> Vec<SpectralField> {
            v.chunks(modes)
                .map(|c| SpectralField::new(c.to_vec(), length).expect("finite flat state"))
                .collect()
        };
        Self { positions: split(q), velocities: split(p) }
    }

    /// Single vector `(q, p)`.
    pub fn to_vector(&self) -> Vec<f64> {
        let (mut q, p) = self.to_flat();
        q.extend(p);
        q
    }

    pub fn from_vector(v: &[f64], components: usize, modes: usize, length: f64) -> Self {
        let h = components * modes;
        Self::from_flat(&v[..h], &v[h..], components, modes, length)
    }

    pub fn is_zero(&self) -> bool {
        self.positions.iter().chain(&self.velocities).all(SpectralField::is_zero)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            positions: self.positions.iter().map(|f| f.scaled(factor)).collect(),
            velocities: self.velocities.iter().map(|f| f.scaled(factor)).collect(),
        }
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &Self) {
        for (a, b) in self.positions.iter_mut().zip(&other.positions) {
            a.axpy(factor, b);
        }
        for (a, b) in self.velocities.iter_mut().zip(&other.velocities) {
            a.axpy(factor, b);
        }
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.positions
            .iter()
            .chain(&self.velocities)
            .flat_map(|f| f.coeffs().iter())
            .fold(0.0, |m, a| m.max(a.abs()))
    }
}
