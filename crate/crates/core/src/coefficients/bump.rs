use super::Coefficient;
use crate::error::{Error, Result};

fn psi(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// C^∞ transition from 0 (s ≤ 0) to 1 (s ≥ 1).
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let p = psi(s);
        p / (p + psi(1.0 - s))
    }
}

/// Smooth nonnegative coefficient equal to `amplitude` on `[a, b]` and
/// vanishing near both ends of `(0, L)`.
///
/// The transition width is `0.9·min(a, L-b)`: as wide as the interval allows,
/// which keeps high derivatives small, while every derivative still vanishes
/// at `0` and `L`. `order` is the Sobolev level the
/// caller intends to use; the plateau is C^∞ so it only feeds validation.
pub fn build_bump(a: f64, b: f64, amplitude: f64, order: usize, length: f64) -> Result<Coefficient> {
    if !(a.is_finite() && b.is_finite() && amplitude.is_finite()) || !(b > a) {
        return Err(Error::InvalidArgument(format!("bump interval ({a}, {b}) is not an open interval")));
    }
    if !(amplitude >= 0.0) {
        return Err(Error::InvalidArgument("bump amplitude must be nonnegative".into()));
    }
    if a <= 0.0 || b >= length {
        return Err(Error::Unsupported(format!(
            "interval ({a}, {b}) touches the boundary of (0, {length}); endpoint conditions must be checked explicitly"
        )));
    }
    let delta = 0.9 * a.min(length - b);
    let c = Coefficient::Bump { a, b, amplitude, delta };
    c.validate(length)?;
    let _ = order;
    Ok(c)
}
