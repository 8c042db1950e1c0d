//! Scalar coefficient functions on `(0, L)`: the couplings `c_{ij}` and the
//! control weights `b`.
//!
//! JSON form is either `{"kind":"expr","name":<catalog entry>,"params":{..}}`
//! or `{"kind":"samples","x":[..],"y":[..]}`.

mod bump;
mod compat;

pub use bump::{build_bump, smooth_step};
pub use compat::{
    check_compat_1d, fornberg_weights, verify_hk_stability, CompatReport, EndpointCondition,
    StabilityReport, StabilityVerdict,
};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// A coefficient descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoefficient", into = "RawCoefficient")]
pub enum Coefficient {
    Constant { value: f64 },
    /// `intercept + slope·x`.
    Linear { slope: f64, intercept: f64 },
    /// `offset + amplitude·cos(frequency·x + phase)`.
    Cosine { amplitude: f64, frequency: f64, phase: f64, offset: f64 },
    /// Smooth plateau equal to `amplitude` on `[a, b]`, vanishing outside
    /// `(a - delta, b + delta)`.
    Bump { a: f64, b: f64, amplitude: f64, delta: f64 },
    /// `values[j]` on `[breaks[j], breaks[j+1])`, zero outside.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
    /// Piecewise-linear interpolation, held constant past the ends.
    Samples { x: Vec<f64>, y: Vec<f64> },
}

impl Coefficient {
    pub fn constant(value: f64) -> Self {
        Coefficient::Constant { value }
    }

    pub fn zero() -> Self {
        Coefficient::Constant { value: 0.0 }
    }

    pub fn linear(slope: f64, intercept: f64) -> Self {
        Coefficient::Linear { slope, intercept }
    }

    pub fn cosine(amplitude: f64, frequency: f64, phase: f64, offset: f64) -> Self {
        Coefficient::Cosine { amplitude, frequency, phase, offset }
    }

    /// Bump with plateau `[a, b]`; `delta` defaults to half the plateau width.
    pub fn bump(a: f64, b: f64, amplitude: f64, delta: Option<f64>) -> Self {
        Coefficient::Bump { a, b, amplitude, delta: delta.unwrap_or(0.5 * (b - a)) }
    }

    /// Indicator-type step function.
    pub fn piecewise(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::InvalidCoefficient(
                "piecewise needs one more break than values".into(),
            ));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidCoefficient("piecewise breaks must increase".into()));
        }
        Ok(Coefficient::Piecewise { breaks, values })
    }

    /// Sampled coefficient. Shape is checked here; finiteness is checked at
    /// assembly.
    pub fn samples(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::InvalidCoefficient(format!(
                "samples need matching x/y of length >= 2, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidCoefficient("sample abscissae must increase".into()));
        }
        Ok(Coefficient::Samples { x, y })
    }

    /// Indicator of `(a, b)` scaled by `value`.
    pub fn indicator(a: f64, b: f64, value: f64) -> Self {
        Coefficient::Piecewise { breaks: vec![a, b], values: vec![value] }
    }

    /// Same descriptor multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self.clone() {
            Self::Constant { value } => Self::Constant { value: factor * value },
            Self::Linear { slope, intercept } => Self::Linear { slope: factor * slope, intercept: factor * intercept },
            Self::Cosine { amplitude, frequency, phase, offset } => {
                Self::Cosine { amplitude: factor * amplitude, frequency, phase, offset: factor * offset }
            }
            Self::Bump { a, b, amplitude, delta } => Self::Bump { a, b, amplitude: factor * amplitude, delta },
            Self::Piecewise { breaks, values } => {
                Self::Piecewise { breaks, values: values.into_iter().map(|v| factor * v).collect() }
            }
            Self::Samples { x, y } => Self::Samples { x, y: y.into_iter().map(|v| factor * v).collect() },
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            Coefficient::Constant { value } => *value == 0.0,
            Coefficient::Linear { slope, intercept } => *slope == 0.0 && *intercept == 0.0,
            Coefficient::Cosine { amplitude, offset, .. } => *amplitude == 0.0 && *offset == 0.0,
            Coefficient::Bump { amplitude, .. } => *amplitude == 0.0,
            Coefficient::Piecewise { values, .. } => values.iter().all(|&v| v == 0.0),
            Coefficient::Samples { y, .. } => y.iter().all(|&v| v == 0.0),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Coefficient::Constant { value } => *value,
            Coefficient::Linear { slope, intercept } => intercept + slope * x,
            Coefficient::Cosine { amplitude, frequency, phase, offset } => {
                offset + amplitude * (frequency * x + phase).cos()
            }
            Coefficient::Bump { a, b, amplitude, delta } => {
                amplitude
                    * smooth_step((x - (a - delta)) / delta)
                    * smooth_step(((b + delta) - x) / delta)
            }
            Coefficient::Piecewise { breaks, values } => {
                if x < breaks[0] || x >= breaks[breaks.len() - 1] {
                    return 0.0;
                }
                let j = breaks.partition_point(|&b| b <= x) - 1;
                values[j]
            }
            Coefficient::Samples { x: xs, y } => {
                if x <= xs[0] {
                    return y[0];
                }
                if x >= xs[xs.len() - 1] {
                    return y[y.len() - 1];
                }
                let j = xs.partition_point(|&b| b <= x) - 1;
                let t = (x - xs[j]) / (xs[j + 1] - xs[j]);
                y[j] + t * (y[j + 1] - y[j])
            }
        }
    }

    /// Points where the coefficient or one of its low derivatives jumps.
    pub fn breakpoints(&self, length: f64) -> Vec<f64> {
        let mut pts = match self {
            Coefficient::Bump { a, b, delta, .. } => vec![a - delta, *a, *b, b + delta],
            Coefficient::Piecewise { breaks, .. } => breaks.clone(),
            Coefficient::Samples { x, .. } => x.clone(),
            _ => Vec::new(),
        };
        pts.retain(|&p| p > 0.0 && p < length);
        pts
    }

    /// Closure of `{c != 0}` intersected with `[0, L]`, if it is an interval
    /// known in closed form.
    pub fn support(&self, length: f64) -> Option<(f64, f64)> {
        match self {
            Coefficient::Bump { a, b, delta, .. } => Some(((a - delta).max(0.0), (b + delta).min(length))),
            Coefficient::Piecewise { breaks, .. } => {
                Some((breaks[0].max(0.0), breaks[breaks.len() - 1].min(length)))
            }
            _ => None,
        }
    }

    /// Structural checks that do not need sampling.
    pub fn validate(&self, length: f64) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|a| a.is_finite());
        match self {
            Coefficient::Constant { value } if !value.is_finite() => {
                Err(Error::InvalidCoefficient("constant must be finite".into()))
            }
            Coefficient::Linear { slope, intercept } if !(slope.is_finite() && intercept.is_finite()) => {
                Err(Error::InvalidCoefficient("linear parameters must be finite".into()))
            }
            Coefficient::Cosine { amplitude, frequency, phase, offset }
                if !finite(&[*amplitude, *frequency, *phase, *offset]) =>
            {
                Err(Error::InvalidCoefficient("cosine parameters must be finite".into()))
            }
            Coefficient::Bump { a, b, amplitude, delta } => {
                if !finite(&[*a, *b, *amplitude, *delta]) || !(b > a) || !(*delta > 0.0) {
                    return Err(Error::InvalidCoefficient(format!(
                        "bump needs a < b and delta > 0, got a={a}, b={b}, delta={delta}"
                    )));
                }
                let slack = 1e-12 * length;
                if a - delta < -slack || b + delta > length + slack {
                    return Err(Error::InvalidCoefficient(format!(
                        "bump support ({}, {}) leaves (0, {length})",
                        a - delta,
                        b + delta
                    )));
                }
                Ok(())
            }
            Coefficient::Piecewise { breaks, values } if !(finite(breaks) && finite(values)) => {
                Err(Error::InvalidCoefficient("piecewise entries must be finite".into()))
            }
            Coefficient::Samples { x, y } if !(finite(x) && finite(y)) => {
                Err(Error::InvalidCoefficient("non-finite sample".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum RawCoefficient {
    Expr {
        name: String,
        #[serde(default)]
        params: Map<String, Value>,
    },
    Samples {
        x: Vec<f64>,
        y: Vec<f64>,
    },
}

fn param(params: &Map<String, Value>, key: &str, default: Option<f64>) -> Result<f64> {
    match params.get(key) {
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::InvalidCoefficient(format!("parameter '{key}' must be a number"))),
        None => default
            .ok_or_else(|| Error::InvalidCoefficient(format!("missing parameter '{key}'"))),
    }
}

fn param_list(params: &Map<String, Value>, key: &str) -> Result<Vec<f64>> {
    let arr = params
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::InvalidCoefficient(format!("parameter '{key}' must be an array")))?;
    arr.iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| Error::InvalidCoefficient(format!("'{key}' entries must be numbers")))
        })
        .collect()
}

impl TryFrom<RawCoefficient> for Coefficient {
    type Error = Error;

    fn try_from(raw: RawCoefficient) -> Result<Self> {
        match raw {
            RawCoefficient::Samples { x, y } => Coefficient::samples(x, y),
            RawCoefficient::Expr { name, params } => match name.as_str() {
                "constant" => Ok(Coefficient::constant(param(&params, "value", None)?)),
                "linear" => Ok(Coefficient::linear(
                    param(&params, "slope", None)?,
                    param(&params, "intercept", Some(0.0))?,
                )),
                "cosine" => Ok(Coefficient::cosine(
                    param(&params, "amplitude", Some(1.0))?,
                    param(&params, "frequency", None)?,
                    param(&params, "phase", Some(0.0))?,
                    param(&params, "offset", Some(0.0))?,
                )),
                "bump" => {
                    let a = param(&params, "a", None)?;
                    let b = param(&params, "b", None)?;
                    let delta = match params.get("delta") {
                        Some(_) => Some(param(&params, "delta", None)?),
                        None => None,
                    };
                    Ok(Coefficient::bump(a, b, param(&params, "amplitude", Some(1.0))?, delta))
                }
                "piecewise" => {
                    Coefficient::piecewise(param_list(&params, "breaks")?, param_list(&params, "values")?)
                }
                other => Err(Error::InvalidCoefficient(format!("unknown coefficient '{other}'"))),
            },
        }
    }
}

impl From<Coefficient> for RawCoefficient {
    fn from(c: Coefficient) -> Self {
        let expr = |name: &str, pairs: Vec<(&str, Value)>| RawCoefficient::Expr {
            name: name.to_string(),
            params: pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        };
        match c {
            Coefficient::Constant { value } => expr("constant", vec![("value", value.into())]),
            Coefficient::Linear { slope, intercept } => {
                expr("linear", vec![("slope", slope.into()), ("intercept", intercept.into())])
            }
            Coefficient::Cosine { amplitude, frequency, phase, offset } => expr(
                "cosine",
                vec![
                    ("amplitude", amplitude.into()),
                    ("frequency", frequency.into()),
                    ("phase", phase.into()),
                    ("offset", offset.into()),
                ],
            ),
            Coefficient::Bump { a, b, amplitude, delta } => expr(
                "bump",
                vec![
                    ("a", a.into()),
                    ("b", b.into()),
                    ("amplitude", amplitude.into()),
                    ("delta", delta.into()),
                ],
            ),
            Coefficient::Piecewise { breaks, values } => {
                expr("piecewise", vec![("breaks", breaks.into()), ("values", values.into())])
            }
            Coefficient::Samples { x, y } => RawCoefficient::Samples { x, y },
        }
    }
}
