//! Gauss–Legendre panels and geometrically graded integration on the torus.
//!
//! Near a band edge the integrand `v1(t)^2 / (w2(x, t) - z)` develops a peak of
//! width `~ sqrt(dist)` at the fiber minimiser. The graded rule places dyadic
//! panels toward each such point so the peak is resolved independently of the
//! uniform grid size.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::wrap;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights on `[-1, 1]`, computed by Newton iteration on the
    /// three-term Legendre recurrence.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * t);
        }
        acc * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub fn gauss16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

pub fn gauss2() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(2))
}

/// A point toward which the graded rule refines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradePoint {
    pub center: f64,
    /// Half-width of the innermost panel.
    pub inner: f64,
    /// Use a 2-point rule on the innermost panel. Appropriate when the
    /// integrand is bounded there but its evaluation is dominated by
    /// cancellation error close to the centre.
    pub coarse_core: bool,
}

const MAX_PANEL: f64 = 0.25;

/// Integrate a `2π`-periodic function over the torus, grading toward every
/// point in `points`. Each point owns the arc halfway to its neighbours.
pub fn graded_periodic<F: FnMut(f64) -> f64>(mut f: F, points: &[GradePoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("graded rule needs at least one point".into()));
    }
    let mut pts: Vec<GradePoint> = points
        .iter()
        .map(|p| GradePoint { center: wrap(p.center), ..*p })
        .collect();
    pts.sort_by(|a, b| a.center.total_cmp(&b.center));
    pts.dedup_by(|later, kept| {
        if (later.center - kept.center).abs() < 1e-12 {
            kept.inner = kept.inner.min(later.inner);
            kept.coarse_core |= later.coarse_core;
            true
        } else {
            false
        }
    });
    if pts.len() > 1 && (pts[0].center + 2.0 * PI - pts[pts.len() - 1].center) < 1e-12 {
        pts.pop();
    }

    let k = pts.len();
    let mut total = 0.0;
    for i in 0..k {
        let c = pts[i].center;
        let (left, right) = if k == 1 {
            (PI, PI)
        } else {
            let prev = pts[(i + k - 1) % k].center;
            let next = pts[(i + 1) % k].center;
            let gap_l = (c - prev).rem_euclid(2.0 * PI);
            let gap_r = (next - c).rem_euclid(2.0 * PI);
            (0.5 * gap_l, 0.5 * gap_r)
        };
        total += graded_half(&mut f, c, right, &pts[i]);
        total += graded_half(&mut f, c, -left, &pts[i]);
    }
    if !total.is_finite() {
        return Err(Error::Convergence(format!("graded quadrature produced {total}")));
    }
    Ok(total)
}

/// Integral from `c` to `c + len` (len may be negative), graded toward `c`.
fn graded_half<F: FnMut(f64) -> f64>(f: &mut F, c: f64, len: f64, p: &GradePoint) -> f64 {
    let span = len.abs();
    if span == 0.0 {
        return 0.0;
    }
    let sign = len.signum();
    let inner = p.inner.clamp(f64::MIN_POSITIVE, span);
    let mut acc = 0.0;
    let mut outer = span;
    while outer > 2.0 * inner {
        let lo = 0.5 * outer;
        let pieces = ((outer - lo) / MAX_PANEL).ceil().max(1.0) as usize;
        let step = (outer - lo) / pieces as f64;
        for s in 0..pieces {
            let a = lo + s as f64 * step;
            acc += gauss16().integrate(|u| f(c + sign * u), a, a + step);
        }
        outer = lo;
    }
    let core = if p.coarse_core { gauss2() } else { gauss16() };
    acc += core.integrate(|u| f(c + sign * u), 0.0, outer);
    acc
}
