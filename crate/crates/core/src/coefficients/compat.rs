use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Coefficient;
use crate::error::{invalid, Error, Result};
use crate::spectral::{assemble_multiplication, weighted_norm_sq};

/// Endpoint derivatives below this magnitude count as zero.
pub const COMPAT_TOLERANCE: f64 = 1e-8;
/// Accuracy order of the one-sided stencils used on sampled coefficients.
const STENCIL_ORDER: usize = 6;
const PROBE_SEED: u64 = 0x5eed_c0ef;
const PROBES: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointCondition {
    pub derivative_order: usize,
    pub endpoint: f64,
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatReport {
    pub level: usize,
    /// Spatial dimension; only 1 is implemented.
    pub dimension: usize,
    pub tolerance: f64,
    pub conditions: Vec<EndpointCondition>,
    pub passed: bool,
}

/// Checks `c^{(2p-1)}(0) = c^{(2p-1)}(L) = 0` for `p = 1..=(k-1)/2`, the
/// endpoint conditions under which multiplication by `c` maps `H_k` into
/// itself.
pub fn check_compat_1d(c: &Coefficient, k: usize, length: f64) -> Result<CompatReport> {
    if !(length > 0.0) {
        return invalid("interval length must be positive");
    }
    c.validate(length)?;
    let mut conditions = Vec::new();
    let top = if k >= 1 { (k - 1) / 2 } else { 0 };
    for p in 1..=top {
        let order = 2 * p - 1;
        for endpoint in [0.0, length] {
            let value = endpoint_derivative(c, order, endpoint, length)?;
            conditions.push(EndpointCondition {
                derivative_order: order,
                endpoint,
                value,
                passed: value.abs() <= COMPAT_TOLERANCE,
            });
        }
    }
    let passed = conditions.iter().all(|c| c.passed);
    Ok(CompatReport { level: k, dimension: 1, tolerance: COMPAT_TOLERANCE, conditions, passed })
}

fn endpoint_derivative(c: &Coefficient, order: usize, at: f64, length: f64) -> Result<f64> {
    Ok(match c {
        Coefficient::Constant { .. } | Coefficient::Piecewise { .. } | Coefficient::Bump { .. } => 0.0,
        Coefficient::Linear { slope, .. } => {
            if order == 1 {
                *slope
            } else {
                0.0
            }
        }
        Coefficient::Cosine { amplitude, frequency, phase, .. } => {
            amplitude
                * frequency.powi(order as i32)
                * (frequency * at + phase + order as f64 * std::f64::consts::FRAC_PI_2).cos()
        }
        Coefficient::Samples { x, y } => {
            let need = order + STENCIL_ORDER;
            let near_left = at < 0.5 * length;
            let covers = if near_left {
                x[0] <= at + 1e-12 * length
            } else {
                x[x.len() - 1] >= at - 1e-12 * length
            };
            if !covers {
                // held constant past the last sample
                return Ok(0.0);
            }
            if x.len() < need {
                return Err(Error::CannotEvaluate(format!(
                    "derivative of order {order} needs {need} samples, have {}",
                    x.len()
                )));
            }
            let (xs, ys): (Vec<f64>, Vec<f64>) = if near_left {
                (x[..need].to_vec(), y[..need].to_vec())
            } else {
                (x[x.len() - need..].to_vec(), y[y.len() - need..].to_vec())
            };
            let w = fornberg_weights(at, &xs, order);
            w.iter().zip(&ys).map(|(a, b)| a * b).sum()
        }
    })
}

/// Finite-difference weights for the `m`-th derivative at `z` from the
/// nodes `x` (Fornberg's recursion).
pub fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<f64> {
    let n = x.len();
    assert!(n > m, "need more nodes than the derivative order");
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityVerdict {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityEntry {
    pub modes: usize,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub level: usize,
    pub probe_modes: usize,
    pub probes: usize,
    pub entries: Vec<StabilityEntry>,
    /// Last estimate over the first.
    pub growth: f64,
    pub verdict: StabilityVerdict,
}

/// Estimates `sup ‖Π_N(c u)‖_{H_k}` over unit `u ∈ H_k` for each `N`.
///
/// The probes are a fixed seeded family supported on the lowest
/// `min(N_list)/4` modes, so every `N` sees the same inputs and growth in the
/// estimate comes from the product's tail only. Growth above 2× between the
/// smallest and the largest `N` is reported as unstable.
pub fn verify_hk_stability(
    c: &Coefficient,
    k: usize,
    n_list: &[usize],
    length: f64,
) -> Result<StabilityReport> {
    if n_list.is_empty() || n_list.contains(&0) {
        return invalid("truncation list must be nonempty and positive");
    }
    let mut sorted = n_list.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let probe_modes = (sorted[0] / 4).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let probes: Vec<Vec<f64>> = (0..PROBES)
        .map(|_| {
            let mut u: Vec<f64> = (0..probe_modes).map(|_| rng.sample(StandardNormal)).collect();
            let norm = weighted_norm_sq(&u, length, k as i32).sqrt();
            u.iter_mut().for_each(|a| *a /= norm);
            u
        })
        .collect();

    let mut entries = Vec::with_capacity(sorted.len());
    for &n in &sorted {
        let m = assemble_multiplication(c, n, length)?;
        let mut best = 0.0_f64;
        for u in &probes {
            let mut cu = vec![0.0; n];
            for (j, &a) in u.iter().enumerate() {
                for (row, out) in cu.iter_mut().enumerate() {
                    *out += m.matrix()[(row, j)] * a;
                }
            }
            best = best.max(weighted_norm_sq(&cu, length, k as i32).sqrt());
        }
        entries.push(StabilityEntry { modes: n, norm: best });
    }
    let first = entries[0].norm;
    let last = entries[entries.len() - 1].norm;
    let growth = if first > 0.0 { last / first } else { 1.0 };
    let verdict = if growth > 2.0 { StabilityVerdict::Unstable } else { StabilityVerdict::Stable };
    Ok(StabilityReport { level: k, probe_modes, probes: PROBES, entries, growth, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn low_levels_have_no_conditions() {
        for k in 0..=2 {
            let r = check_compat_1d(&Coefficient::linear(1.0, 0.0), k, PI).unwrap();
            assert!(r.passed && r.conditions.is_empty());
        }
    }

    #[test]
    fn constant_passes_every_level() {
        for k in 0..10 {
            assert!(check_compat_1d(&Coefficient::constant(3.0), k, PI).unwrap().passed);
        }
    }

    #[test]
    fn identity_function_fails_at_level_three() {
        let r = check_compat_1d(&Coefficient::linear(1.0, 0.0), 3, PI).unwrap();
        assert!(!r.passed);
        let left = &r.conditions[0];
        assert_eq!(left.derivative_order, 1);
        assert_eq!(left.endpoint, 0.0);
        assert_eq!(left.value, 1.0);
    }

    #[test]
    fn cosine_even_mode_is_compatible() {
        // cos(2x) has vanishing odd derivatives at 0 and π; sin-type does not.
        let c = Coefficient::cosine(1.0, 2.0, 0.0, 0.0);
        assert!(check_compat_1d(&c, 7, PI).unwrap().passed);
        let s = Coefficient::cosine(1.0, 2.0, -std::f64::consts::FRAC_PI_2, 0.0);
        assert!(!check_compat_1d(&s, 3, PI).unwrap().passed);
    }

    #[test]
    fn sampled_derivatives_match_closed_form() {
        let n = 401;
        let x: Vec<f64> = (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect();
        let cos2: Vec<f64> = x.iter().map(|&t| (2.0 * t).cos()).collect();
        let c = Coefficient::samples(x.clone(), cos2).unwrap();
        assert!(check_compat_1d(&c, 3, PI).unwrap().passed);

        let lin = Coefficient::samples(x.clone(), x.clone()).unwrap();
        let r = check_compat_1d(&lin, 3, PI).unwrap();
        assert!(!r.passed);
        assert!((r.conditions[0].value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coarse_samples_cannot_be_evaluated() {
        let c = Coefficient::samples(vec![0.0, 1.0, 2.0, PI], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(check_compat_1d(&c, 3, PI), Err(Error::CannotEvaluate(_))));
        assert!(check_compat_1d(&c, 2, PI).unwrap().passed);
    }

    #[test]
    fn fornberg_reproduces_polynomial_derivatives() {
        let x = [0.0, 0.1, 0.25, 0.3, 0.5, 0.6, 0.8];
        let w = fornberg_weights(0.0, &x, 1);
        let d: f64 = w.iter().zip(&x).map(|(a, t)| a * (t * t * t + 2.0 * t)).sum();
        assert!((d - 2.0).abs() < 1e-10);
        let w3 = fornberg_weights(0.0, &x, 3);
        let d3: f64 = w3.iter().zip(&x).map(|(a, t)| a * t.powi(3)).sum();
        assert!((d3 - 6.0).abs() < 1e-8);
    }

    #[test]
    fn level_zero_is_bounded_by_sup() {
        for c in [
            Coefficient::linear(1.0, 0.0),
            Coefficient::cosine(1.0, 2.0, 0.0, 0.0),
            Coefficient::bump(1.0, 2.0, 1.0, None),
        ] {
            let sup = (0..=10_000).map(|i| c.value(PI * i as f64 / 10_000.0).abs()).fold(0.0, f64::max);
            let r = verify_hk_stability(&c, 0, &[16, 32, 64], PI).unwrap();
            assert_eq!(r.verdict, StabilityVerdict::Stable);
            for e in &r.entries {
                assert!(e.norm <= sup * (1.0 + 1e-10), "{} > {sup}", e.norm);
            }
        }
    }
}
