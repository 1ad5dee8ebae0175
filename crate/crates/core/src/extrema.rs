//! Fiber and band extrema of `w2`, plus vanishing-order estimation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::wrap;
use crate::model::ModelSpec;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[a, b]`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Golden-section search followed by bisection on the sign of a central
/// difference, which recovers the digits golden section loses on flat minima.
pub fn refine_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (x0, f0) = golden_min(&mut f, a, b, tol.max(1e-9));
    let step = 1e-6 * (1.0 + x0.abs());
    let mut slope = |x: f64| f(x + step) - f(x - step);
    let span = 20.0 * tol.max(1e-9);
    let (mut lo, mut hi) = (x0 - span, x0 + span);
    let (s_lo, s_hi) = (slope(lo), slope(hi));
    if !(s_lo < 0.0 && s_hi > 0.0) {
        return (x0, f0);
    }
    for _ in 0..100 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    if fx <= f0 {
        (x, fx)
    } else {
        (x0, f0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberExtrema {
    pub min: f64,
    pub argmin: f64,
    pub max: f64,
    pub argmax: f64,
}

/// `min` and `max` of `y -> w2(x, y)`, located on a uniform scan of `scan_n`
/// points and refined inside the best scan cell.
pub fn fiber_extrema(model: &ModelSpec, x: f64, scan_n: usize, tol: f64) -> FiberExtrema {
    let h = 2.0 * PI / scan_n as f64;
    let mut best_lo = (f64::INFINITY, 0.0);
    let mut best_hi = (f64::NEG_INFINITY, 0.0);
    for k in 0..scan_n {
        let y = -PI + (k as f64 + 0.5) * h;
        let v = model.w2(x, y);
        if v < best_lo.0 {
            best_lo = (v, y);
        }
        if v > best_hi.0 {
            best_hi = (v, y);
        }
    }
    let (ymin, vmin) = refine_min(|y| model.w2(x, y), best_lo.1 - h, best_lo.1 + h, tol);
    let (ymax, vneg) = refine_min(|y| -model.w2(x, y), best_hi.1 - h, best_hi.1 + h, tol);
    let (min, argmin) = if vmin <= best_lo.0 { (vmin, wrap(ymin)) } else { (best_lo.0, best_lo.1) };
    let (max, argmax) = if -vneg >= best_hi.0 { (-vneg, wrap(ymax)) } else { (best_hi.0, best_hi.1) };
    FiberExtrema { min, argmin, max, argmax }
}

/// Global extrema of `w2` over the torus squared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandExtrema {
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    /// Points `(x, y)` at which `w2` attains `m`.
    pub argmin: Vec<(f64, f64)>,
    /// Points `(x, y)` at which `w2` attains `M`.
    pub argmax: Vec<(f64, f64)>,
}

/// Scan `max(n, 64)` fibers, then refine every local extremum of the fiber
/// minimum (maximum) in `x`. Extremisers within `1e-10` of the optimum are
/// all reported.
pub fn band_extrema(model: &ModelSpec, n: usize, tol: f64) -> Result<BandExtrema> {
    let s = n.max(64);
    let h = 2.0 * PI / s as f64;
    let xs: Vec<f64> = (0..s).map(|j| -PI + (j as f64 + 0.5) * h).collect();
    let fibers: Vec<FiberExtrema> = xs.iter().map(|&x| fiber_extrema(model, x, s, tol)).collect();
    for (node, f) in fibers.iter().enumerate() {
        if !(f.min.is_finite() && f.max.is_finite()) {
            return Err(Error::NonFinite { node, x: xs[node], value: f.min + f.max });
        }
    }

    let mut lows = Vec::new();
    let mut highs = Vec::new();
    for j in 0..s {
        let (p, q) = ((j + s - 1) % s, (j + 1) % s);
        if fibers[j].min <= fibers[p].min && fibers[j].min <= fibers[q].min {
            let (x, v) = refine_min(|x| fiber_extrema(model, x, s, tol).min, xs[j] - h, xs[j] + h, tol);
            let (x, v) = if v <= fibers[j].min { (wrap(x), v) } else { (xs[j], fibers[j].min) };
            lows.push((v, x));
        }
        if fibers[j].max >= fibers[p].max && fibers[j].max >= fibers[q].max {
            let (x, v) = refine_min(|x| -fiber_extrema(model, x, s, tol).max, xs[j] - h, xs[j] + h, tol);
            let (x, v) = if -v >= fibers[j].max { (wrap(x), -v) } else { (xs[j], fibers[j].max) };
            highs.push((v, x));
        }
    }
    let m = lows.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let big_m = highs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);

    let collect = |pts: &[(f64, f64)], target: f64, low: bool| -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for &(v, x) in pts {
            if (v - target).abs() > 1e-10 * (1.0 + target.abs()) {
                continue;
            }
            if out.iter().any(|p| (wrap(p.0 - x)).abs() < 1e-6) {
                continue;
            }
            let f = fiber_extrema(model, x, s, tol);
            out.push((x, if low { f.argmin } else { f.argmax }));
        }
        out
    };
    Ok(BandExtrema { m, big_m, argmin: collect(&lows, m, true), argmax: collect(&highs, big_m, false) })
}

/// Order of vanishing of `f` at `at`: 0 when `|f(at)| > 1e-12`, otherwise the
/// rounded slope of `log|f|` against `log|t - at|` over `|t - at| = 2^{-j}`,
/// `j = 4..=20`. Fails when the slope is further than 0.1 from an integer.
pub fn vanishing_order<F: Fn(f64) -> f64>(f: F, at: f64) -> Result<u32> {
    if f(at).abs() > 1e-12 {
        return Ok(0);
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in 4..=20 {
        let d = 2f64.powi(-j);
        let v = 0.5 * (f(at + d).abs() + f(at - d).abs());
        if v == 0.0 || !v.is_finite() {
            return Err(Error::EstimationFailed(format!(
                "function vanishes identically or is not finite near {at} (|f| = {v} at offset {d:e})"
            )));
        }
        xs.push(d.ln());
        ys.push(v.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let order = slope.round();
    if (slope - order).abs() > 0.1 || order < 1.0 {
        return Err(Error::EstimationFailed(format!("log-log slope {slope:.4} is not near an integer")));
    }
    Ok(order as u32)
}
