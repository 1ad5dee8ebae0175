//! Bracketing and bisection for monotone scalar functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub z: f64,
    pub residual: f64,
}

/// Bisection on a bracket `[lo, hi]` with `f(lo)` and `f(hi)` of opposite
/// sign. Stops when `|f| <= ftol` or the bracket shrinks to a few ulps.
pub fn bisect<F: FnMut(f64) -> Result<f64>>(mut f: F, mut lo: f64, mut hi: f64, ftol: f64, max_iter: usize) -> Result<Root> {
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(Root { z: lo, residual: 0.0 });
    }
    if fhi == 0.0 {
        return Ok(Root { z: hi, residual: 0.0 });
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Convergence(format!("no sign change on [{lo}, {hi}] ({flo}, {fhi})")));
    }
    let mut best = if flo.abs() < fhi.abs() { Root { z: lo, residual: flo.abs() } } else { Root { z: hi, residual: fhi.abs() } };
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            return Ok(best);
        }
        let fm = f(mid)?;
        if fm.abs() < best.residual {
            best = Root { z: mid, residual: fm.abs() };
        }
        if fm.abs() <= ftol || (hi - lo).abs() <= 4.0 * f64::EPSILON * mid.abs().max(1e-300) {
            return Ok(best);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Err(Error::Convergence(format!("bisection did not converge in {max_iter} steps (bracket [{lo}, {hi}])")))
}

/// Step away from `start` in direction `dir` (±1) with doubling widths
/// `1, 2, 4, ...` until `accept(f(point))` holds.
pub fn expand<F: FnMut(f64) -> Result<f64>, A: Fn(f64) -> bool>(mut f: F, start: f64, dir: f64, accept: A, max_doublings: usize) -> Result<f64> {
    let mut width = 1.0;
    for _ in 0..max_doublings {
        let p = start + dir * width;
        if accept(f(p)?) {
            return Ok(p);
        }
        width *= 2.0;
    }
    Err(Error::Convergence(format!("bracket expansion from {start} failed after {max_doublings} doublings")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cube_root() {
        let r = bisect(|x| Ok(x * x * x - 2.0), 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r.z - 2f64.cbrt()).abs() < 1e-14);
        assert!(r.residual <= 1e-14);
    }

    #[test]
    fn rejects_non_bracket() {
        assert!(bisect(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 100).is_err());
    }

    #[test]
    fn expansion_doubles() {
        let p = expand(|x| Ok(x), 0.0, -1.0, |v| v < -5.0, 20).unwrap();
        assert_eq!(p, -8.0);
    }
}
