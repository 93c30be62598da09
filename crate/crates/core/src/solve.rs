//! Bracketed bisection, the root finder used throughout the crate.
//!
//! All inversions here act on strictly monotone functions, so a bracketed
//! bisection is robust, derivative-free, and converges in a bounded number
//! of steps.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("non-finite function value at {x}")]
    NonFinite { x: f64 },
}

/// Find a root of `f` on `[lo, hi]` by bisection.
///
/// Requires `f(lo)` and `f(hi)` to have opposite signs (either orientation).
/// Stops when the bracket width drops below `rel_tol` relative to the
/// midpoint magnitude (with an absolute floor for roots near zero).
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64, SolveError> {
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let f_lo = f(lo);
    let f_hi = f(hi);
    if !f_lo.is_finite() {
        return Err(SolveError::NonFinite { x: lo });
    }
    if !f_hi.is_finite() {
        return Err(SolveError::NonFinite { x: hi });
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(SolveError::NoBracket { lo, hi, f_lo, f_hi });
    }

    let mut f_lo = f_lo;
    // 200 halvings exhaust f64 resolution on any bracket.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= rel_tol * mid.abs().max(f64::MIN_POSITIVE) {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if !f_mid.is_finite() {
            return Err(SolveError::NonFinite { x: mid });
        }
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
