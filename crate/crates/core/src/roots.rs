//! Scalar root finding for monotone increasing functions.

use crate::error::{QaError, Result};

const MAX_ITERATIONS: usize = 200;

/// Finds a root of an increasing function `f` on `[lo, hi]` where `f(lo) <= 0 <= f(hi)`.
///
/// Bisects until the midpoint is no longer distinct from an endpoint, which
/// resolves the root to the last representable bit. Endpoints may be infinite
/// in value (e.g. a pole at `hi`); only interior points are evaluated.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let value = f(mid);
        if value.is_nan() {
            break;
        }
        if value > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Expands `step` by doubling from `anchor` in direction `sign` until `f` changes sign.
///
/// Returns the far endpoint of the bracket. `f(anchor)` must have the sign opposite
/// to the one sought.
pub fn expand_bracket<F: Fn(f64) -> f64>(f: &F, anchor: f64, sign: f64, mut step: f64) -> Result<f64> {
    for _ in 0..MAX_ITERATIONS {
        let x = anchor + sign * step;
        let v = f(x);
        if (sign > 0.0 && v >= 0.0) || (sign < 0.0 && v <= 0.0) {
            return Ok(x);
        }
        step *= 2.0;
    }
    Err(QaError::Convergence("bracket expansion exhausted".into()))
}
