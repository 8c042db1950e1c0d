//! Dirichlet Laplacian on `(0, L)` in the sine eigenbasis.
//!
//! A scalar function is stored through its coefficients against
//! `φ_k(x) = √(2/L) sin(kπx/L)`, `k = 1..=N`. The basis is orthonormal in
//! `L²(0, L)` and diagonalizes `A = -∂²ₓ` with eigenvalues `λ_k = (kπ/L)²`,
//! so fractional powers and the Sobolev scale `H_s = D(A^{s/2})` act
//! coefficient-wise.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coefficients::Coefficient;
use crate::error::{invalid, Error, Result};

/// Gauss nodes per quadrature panel.
pub const NODES_PER_PANEL: usize = 8;

/// `λ_k = (kπ/L)²`.
pub fn eigenvalue(k: usize, length: f64) -> Result<f64> {
    if k == 0 {
        return invalid("mode index starts at 1");
    }
    if !(length > 0.0) || !length.is_finite() {
        return invalid(format!("interval length must be positive, got {length}"));
    }
    Ok(eigenvalue_unchecked(k, length))
}

#[inline]
pub(crate) fn eigenvalue_unchecked(k: usize, length: f64) -> f64 {
    let w = k as f64 * PI / length;
    w * w
}

/// All eigenvalues `λ_1..λ_N`.
pub fn eigenvalues(modes: usize, length: f64) -> Vec<f64> {
    (1..=modes).map(|k| eigenvalue_unchecked(k, length)).collect()
}

/// `φ_k(x)`.
#[inline]
pub fn basis_value(k: usize, x: f64, length: f64) -> f64 {
    (2.0 / length).sqrt() * (k as f64 * PI * x / length).sin()
}

/// `φ_k'(x)`.
#[inline]
pub fn basis_slope(k: usize, x: f64, length: f64) -> f64 {
    let w = k as f64 * PI / length;
    (2.0 / length).sqrt() * w * (w * x).cos()
}

/// Modal coefficient vector of a scalar function on `(0, L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    coeffs: Vec<f64>,
    length: f64,
}

impl SpectralField {
    pub fn new(coeffs: Vec<f64>, length: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return invalid("truncation order must be at least 1");
        }
        if !(length > 0.0) || !length.is_finite() {
            return invalid(format!("interval length must be positive, got {length}"));
        }
        if let Some(i) = coeffs.iter().position(|a| !a.is_finite()) {
            return Err(Error::InvalidState(format!("coefficient {} is not finite", i + 1)));
        }
        Ok(Self { coeffs, length })
    }

    pub fn zeros(modes: usize, length: f64) -> Self {
        assert!(modes >= 1 && length > 0.0);
        Self { coeffs: vec![0.0; modes], length }
    }

    /// The normalized eigenfunction `φ_k` truncated to `modes` coefficients.
    pub fn unit_mode(k: usize, modes: usize, length: f64) -> Result<Self> {
        if k == 0 || k > modes {
            return invalid(format!("mode {k} outside 1..={modes}"));
        }
        let mut field = Self::new(vec![0.0; modes], length)?;
        field.coeffs[k - 1] = 1.0;
        Ok(field)
    }

    /// L² projection of `f` onto the first `modes` eigenfunctions.
    pub fn project(f: impl Fn(f64) -> f64, modes: usize, length: f64) -> Result<Self> {
        let rule = PanelQuadrature::new(length, 4 * modes.max(16), &[]);
        let mut coeffs = vec![0.0; modes];
        for &(x, w) in rule.points() {
            let fx = f(x);
            if !fx.is_finite() {
                return Err(Error::InvalidState(format!("non-finite sample at x = {x}")));
            }
            for (k, c) in coeffs.iter_mut().enumerate() {
                *c += w * fx * basis_value(k + 1, x, length);
            }
        }
        Self::new(coeffs, length)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn truncation(&self) -> usize {
        self.coeffs.len()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&a| a == 0.0)
    }

    /// `A^{s/2} u`: coefficient `k` scaled by `λ_k^{s/2}`.
    pub fn apply_fractional_power(&self, s: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * eigenvalue_unchecked(k + 1, self.length).powf(0.5 * s))
            .collect();
        Self { coeffs, length: self.length }
    }

    /// `|u|_k = |A^{k/2} u|`.
    pub fn sobolev_norm(&self, level: i32) -> f64 {
        self.sobolev_norm_sq(level).sqrt()
    }

    pub fn sobolev_norm_sq(&self, level: i32) -> f64 {
        weighted_norm_sq(&self.coeffs, self.length, level)
    }

    /// Pointwise value `Σ a_k φ_k(x)`.
    pub fn evaluate(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * basis_value(k + 1, x, self.length))
            .sum()
    }

    /// Pointwise slope `Σ a_k φ_k'(x)`.
    pub fn slope(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * basis_slope(k + 1, x, self.length))
            .sum()
    }

    /// L² inner product (Euclidean in coefficients).
    pub fn dot(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|a| a * factor).collect(),
            length: self.length,
        }
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &Self) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += factor * b;
        }
    }

    pub fn compatible(&self, other: &Self) -> bool {
        self.coeffs.len() == other.coeffs.len() && self.length == other.length
    }
}

/// `Σ_k λ_k^level a_k²` for a raw coefficient slice.
pub(crate) fn weighted_norm_sq(coeffs: &[f64], length: f64, level: i32) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, a)| eigenvalue_unchecked(k + 1, length).powi(level) * a * a)
        .sum()
}

/// Composite Gauss-Legendre rule on `[0, L]`: at least `panels` uniform
/// panels, refined at the given breakpoints, `NODES_PER_PANEL` nodes each.
#[derive(Debug, Clone)]
pub struct PanelQuadrature {
    points: Vec<(f64, f64)>,
}

impl PanelQuadrature {
    pub fn new(length: f64, panels: usize, breakpoints: &[f64]) -> Self {
        let panels = panels.max(1);
        let mut edges: Vec<f64> = (0..=panels).map(|i| length * i as f64 / panels as f64).collect();
        edges.extend(breakpoints.iter().copied().filter(|&b| b > 0.0 && b < length));
        edges.sort_by(|a, b| a.total_cmp(b));
        edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * length);

        let rule = GaussLegendre::new(NonZeroUsize::new(NODES_PER_PANEL).unwrap());
        let reference = rule.as_node_weight_pairs();
        let mut points = Vec::with_capacity((edges.len() - 1) * NODES_PER_PANEL);
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for &(node, weight) in reference {
                points.push((mid + half * node, half * weight));
            }
        }
        Self { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().map(|&(x, w)| w * f(x)).sum()
    }
}

/// Galerkin matrix of `u ↦ c u` in the sine basis.
#[derive(Debug, Clone)]
pub struct MultiplicationOperator {
    matrix: DMatrix<f64>,
    source: Coefficient,
    length: f64,
}

impl MultiplicationOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn source(&self) -> &Coefficient {
        &self.source
    }

    pub fn truncation(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn apply(&self, u: &SpectralField) -> SpectralField {
        let mut out = vec![0.0; self.truncation()];
        matvec_add(&self.matrix, u.coeffs(), 1.0, &mut out);
        SpectralField { coeffs: out, length: self.length }
    }

    /// Largest asymmetry `|M_jk - M_kj|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.matrix.amax().max(f64::MIN_POSITIVE);
        let n = self.matrix.nrows();
        let mut worst = 0.0_f64;
        for j in 0..n {
            for k in 0..j {
                worst = worst.max((self.matrix[(j, k)] - self.matrix[(k, j)]).abs());
            }
        }
        worst / scale
    }
}

/// `M_jk = ∫₀ᴸ c φ_j φ_k dx` by composite Gauss-Legendre with at least
/// `4N` panels, aligned with the coefficient's breakpoints.
pub fn assemble_multiplication(
    coefficient: &Coefficient,
    modes: usize,
    length: f64,
) -> Result<MultiplicationOperator> {
    if modes == 0 {
        return invalid("truncation order must be at least 1");
    }
    if !(length > 0.0) {
        return invalid(format!("interval length must be positive, got {length}"));
    }
    let rule = PanelQuadrature::new(length, 4 * modes.max(8), &coefficient.breakpoints(length));

    let mut matrix = DMatrix::<f64>::zeros(modes, modes);
    let mut phi = vec![0.0; modes];
    for &(x, w) in rule.points() {
        let cx = coefficient.value(x);
        if !cx.is_finite() {
            return Err(Error::InvalidCoefficient(format!("non-finite value {cx} at x = {x}")));
        }
        if cx == 0.0 {
            continue;
        }
        for (k, p) in phi.iter_mut().enumerate() {
            *p = basis_value(k + 1, x, length);
        }
        let wc = w * cx;
        for k in 0..modes {
            let s = wc * phi[k];
            for j in k..modes {
                matrix[(j, k)] += s * phi[j];
            }
        }
    }
    for k in 0..modes {
        for j in (k + 1)..modes {
            matrix[(k, j)] = matrix[(j, k)];
        }
    }
    Ok(MultiplicationOperator { matrix, source: coefficient.clone(), length })
}

/// `out += factor * m x` for a column-major dense matrix.
#[inline]
pub(crate) fn matvec_add(m: &DMatrix<f64>, x: &[f64], factor: f64, out: &mut [f64]) {
    let rows = m.nrows();
    debug_assert_eq!(m.ncols(), x.len());
    debug_assert_eq!(out.len(), rows);
    let data = m.as_slice();
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let s = factor * xj;
        let col = &data[j * rows..(j + 1) * rows];
        for (o, &c) in out.iter_mut().zip(col) {
            *o += s * c;
        }
    }
}

/// `out += factor * mᵀ x`.
#[inline]
pub(crate) fn matvec_transpose_add(m: &DMatrix<f64>, x: &[f64], factor: f64, out: &mut [f64]) {
    let rows = m.nrows();
    debug_assert_eq!(rows, x.len());
    let data = m.as_slice();
    for (j, o) in out.iter_mut().enumerate() {
        let col = &data[j * rows..(j + 1) * rows];
        let dot: f64 = col.iter().zip(x).map(|(c, v)| c * v).sum();
        *o += factor * dot;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;

    #[test]
    fn eigenvalue_closed_form() {
        assert_relative_eq!(eigenvalue(1, PI).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(eigenvalue(3, PI).unwrap(), 9.0, epsilon = 1e-13);
        assert_relative_eq!(eigenvalue(2, 1.0).unwrap(), 39.478_417_604_357_43, epsilon = 1e-12);
        assert!(eigenvalue(0, 1.0).is_err());
        assert!(eigenvalue(1, 0.0).is_err());
        assert!(eigenvalue(1, -2.0).is_err());
    }

    #[test]
    fn fractional_power_cases() {
        let u = SpectralField::new(vec![0.3, -1.2, 2.0, 0.5], 2.0).unwrap();
        assert_eq!(u.apply_fractional_power(0.0), u);
        let m1 = SpectralField::unit_mode(1, 5, PI).unwrap();
        let out = m1.apply_fractional_power(2.0);
        assert_relative_eq!(out.coeffs()[0], 1.0, epsilon = 1e-14);
        let back = u.apply_fractional_power(-2.0).apply_fractional_power(2.0);
        for (a, b) in back.coeffs().iter().zip(u.coeffs()) {
            assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
        }
    }

    #[test]
    fn sobolev_norm_cases() {
        assert_eq!(SpectralField::zeros(6, 1.0).sobolev_norm(3), 0.0);
        let e2 = SpectralField::unit_mode(2, 4, PI).unwrap();
        assert_relative_eq!(e2.sobolev_norm(1), 2.0, epsilon = 1e-14);
        let u = SpectralField::new(vec![3.0, 4.0], PI).unwrap();
        assert_relative_eq!(u.sobolev_norm(0), 5.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_non_finite_coefficients() {
        assert!(SpectralField::new(vec![1.0, f64::NAN], 1.0).is_err());
        assert!(SpectralField::new(vec![], 1.0).is_err());
        assert!(SpectralField::new(vec![1.0], 0.0).is_err());
    }

    #[test]
    fn constant_coefficient_gives_identity() {
        for &(n, l) in &[(4usize, PI), (9, 1.0), (16, 2.5)] {
            let m = assemble_multiplication(&Coefficient::constant(1.0), n, l).unwrap();
            let id = DMatrix::<f64>::identity(n, n);
            assert!((m.matrix() - id).amax() < 1e-12);
        }
    }

    #[test]
    fn cosine_coefficient_entry() {
        // (2/π)∫₀^π sin²x cos2x dx by an independent fine midpoint sum.
        let samples = 200_000;
        let h = PI / samples as f64;
        let oracle: f64 = (0..samples)
            .map(|i| {
                let x = (i as f64 + 0.5) * h;
                (2.0 / PI) * x.sin().powi(2) * (2.0 * x).cos() * h
            })
            .sum();
        assert_relative_eq!(oracle, -0.5, epsilon = 1e-9);
        let m = assemble_multiplication(&Coefficient::cosine(1.0, 2.0, 0.0, 0.0), 4, PI).unwrap();
        assert_relative_eq!(m.matrix()[(0, 0)], oracle, epsilon = 1e-9);
        assert_relative_eq!(m.matrix()[(0, 0)], -0.5, epsilon = 1e-13);
    }

    #[test]
    fn nonnegative_bump_is_positive_semidefinite() {
        let c = Coefficient::bump(1.0, 2.0, 1.5, None);
        let m = assemble_multiplication(&c, 16, PI).unwrap();
        assert!(m.asymmetry() <= 1e-12);
        let eig = SymmetricEigen::new(m.matrix().clone());
        assert!(eig.eigenvalues.min() >= -1e-10);
    }

    #[test]
    fn rejects_non_finite_coefficient_samples() {
        let c = Coefficient::samples(vec![0.0, 1.0, 2.0], vec![1.0, f64::INFINITY, 1.0]).unwrap_or_else(
            |_| Coefficient::Samples { x: vec![0.0, 1.0, 2.0], y: vec![1.0, f64::INFINITY, 1.0] },
        );
        assert!(matches!(assemble_multiplication(&c, 4, 2.0), Err(Error::InvalidCoefficient(_))));
    }

    #[test]
    fn product_converges_to_pointwise_product() {
        // c(x) = 1 + x(π - x)/4, u = x(π - x): the Galerkin product should
        // approach the sampled pointwise product as N grows.
        let c = Coefficient::samples(
            (0..=400).map(|i| PI * i as f64 / 400.0).collect(),
            (0..=400)
                .map(|i| {
                    let x = PI * i as f64 / 400.0;
                    1.0 + x * (PI - x) / 4.0
                })
                .collect(),
        )
        .unwrap();
        let cu = |x: f64| (1.0 + x * (PI - x) / 4.0) * x * (PI - x);
        let mut errors = Vec::new();
        for &n in &[8usize, 16, 32] {
            let u = SpectralField::project(|x| x * (PI - x), n, PI).unwrap();
            let m = assemble_multiplication(&c, n, PI).unwrap();
            let prod = m.apply(&u);
            let err = (1..40)
                .map(|i| {
                    let x = PI * i as f64 / 40.0;
                    (prod.evaluate(x) - cu(x)).abs()
                })
                .fold(0.0, f64::max);
            errors.push(err);
        }
        assert!(errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");
    }
}
