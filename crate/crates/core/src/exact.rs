//! The exactly solvable model `w1 = a`, `v1 = b`, `v0 = 0`,
//! `w2(x, y) = 1 - cos(x - y)`.
//!
//! Translation invariance makes `Δ` independent of `x`, and the two-particle
//! kernel diagonalises on Fourier modes. With `s = sqrt(z² - 2z)`:
//!
//! * `Δ(z) = a - z - π b² / s` for `z < 0` and `a - z + π b² / s` for `z > 2`;
//! * `d_k(z) = ∫ cos(kt) / (1 - cos t - z) dt` equals `2π r^k / s` below the
//!   band and `-2π r^k / s` above it, where `r = 1 - z ∓ s`;
//! * mode `k` carries an eigenvalue wherever `λ_k(z) = b² d_k(z) / (2Δ(z)) = 1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::linalg::Cluster;
use crate::model::{builtin, Family, ModelSpec};
use crate::oracle::FockGridBasis;
use crate::roots::{bisect, Root};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactParams {
    pub a: f64,
    pub b: f64,
    pub w0: f64,
}

impl ExactParams {
    pub fn new(a: f64, b: f64, w0: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && w0.is_finite()) || a == 0.0 || b == 0.0 {
            return Err(Error::InvalidArgument(format!("need finite nonzero a, b (got a = {a}, b = {b})")));
        }
        Ok(Self { a, b, w0 })
    }

    pub fn family(&self) -> Family {
        Family::Exact { a: self.a, b: self.b, w0: self.w0 }
    }

    pub fn model(&self) -> Result<ModelSpec> {
        builtin(&self.family())
    }
}

/// Where a branch of eigenvalues lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Branch {
    /// Below `E_min`.
    Below = 1,
    /// Above `E_max`.
    Above = 2,
    /// Inside `((E_max + 2) / 2, E_max)`, between the band and `E_max`.
    Inner = 3,
}

impl From<Branch> for u8 {
    fn from(b: Branch) -> u8 {
        b as u8
    }
}

impl TryFrom<u8> for Branch {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Branch::Below),
            2 => Ok(Branch::Above),
            3 => Ok(Branch::Inner),
            other => Err(format!("branch must be 1, 2 or 3, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactEigenvalue {
    pub branch: Branch,
    pub k: u32,
    pub xi: f64,
    pub multiplicity: u8,
    /// `|λ_k(ξ) - 1|`.
    pub equation_residual: f64,
    pub residual_vs_oracle: Option<f64>,
}

fn off_band(z: f64) -> Result<f64> {
    if !z.is_finite() || (0.0..=2.0).contains(&z) {
        return Err(Error::Domain(format!("z = {z} lies in the band [0, 2]")));
    }
    Ok((z * z - 2.0 * z).sqrt())
}

pub fn delta_closed(p: &ExactParams, z: f64) -> Result<f64> {
    let s = off_band(z)?;
    let tail = PI * p.b * p.b / s;
    Ok(if z < 0.0 { p.a - z - tail } else { p.a - z + tail })
}

/// `∫ cos(kt) / (1 - cos t - z) dt` in closed form.
pub fn dk_closed(k: u32, z: f64) -> Result<f64> {
    let s = off_band(z)?;
    let k = k as i32;
    Ok(if z < 0.0 {
        2.0 * PI * (1.0 - z - s).powi(k) / s
    } else {
        -2.0 * PI * (1.0 - z + s).powi(k) / s
    })
}

/// `λ_k(z) = b² d_k(z) / (2 Δ(z))`.
pub fn lambda_k(p: &ExactParams, k: u32, z: f64) -> Result<f64> {
    let d = delta_closed(p, z)?;
    if d == 0.0 {
        return Err(Error::Domain(format!("Δ vanishes at z = {z}")));
    }
    Ok(p.b * p.b * dk_closed(k, z)? / (2.0 * d))
}

/// `(E_min, E_max)`, the zeros of `Δ` below and above the band.
pub fn band_edges(p: &ExactParams) -> Result<(f64, f64)> {
    let d = |z: f64| delta_closed(p, z);
    let lo = edge_probe(&d, 0.0, -1.0, |v| v < 0.0)?;
    let far = far_point(&d, lo, -1.0, |v| v > 0.0)?;
    let e_min = bisect(d, far, lo, 0.0, 4000)?.z;
    let hi = edge_probe(&d, 2.0, 1.0, |v| v > 0.0)?;
    let far = far_point(&d, hi, 1.0, |v| v < 0.0)?;
    let e_max = bisect(d, hi, far, 0.0, 4000)?.z;
    Ok((e_min, e_max))
}

fn edge_probe(d: &impl Fn(f64) -> Result<f64>, edge: f64, dir: f64, ok: impl Fn(f64) -> bool) -> Result<f64> {
    for j in 1..=1000 {
        let z = edge + dir * 2f64.powi(-j);
        if z == edge {
            break;
        }
        if ok(d(z)?) {
            return Ok(z);
        }
    }
    Err(Error::Convergence(format!("no sign change of Δ near the band edge {edge}")))
}

fn far_point(d: &impl Fn(f64) -> Result<f64>, start: f64, dir: f64, ok: impl Fn(f64) -> bool) -> Result<f64> {
    let mut w = 1.0;
    for _ in 0..1100 {
        let z = start + dir * w;
        if ok(d(z)?) {
            return Ok(z);
        }
        w *= 2.0;
    }
    Err(Error::Convergence("bracket expansion for a band edge failed".into()))
}

/// Solve `λ_k(z) = 1` on one branch. `None` when the branch equation shows
/// no sign change on its search interval.
pub fn solve_branch(p: &ExactParams, k: u32, branch: Branch) -> Result<Option<ExactEigenvalue>> {
    let (e_min, e_max) = band_edges(p)?;
    let width = 2.0 * (p.a.abs() + p.b * p.b + 1.0);
    let (lo, hi) = match branch {
        Branch::Below => (e_min - width, e_min - 1e-13),
        Branch::Above => (e_max + 1e-13, e_max + width),
        Branch::Inner => (0.5 * (e_max + 2.0), e_max - 1e-13),
    };
    let f = |z: f64| lambda_k(p, k, z).map(|l| l - 1.0);
    let (mut lo, mut hi) = (lo, hi);
    match branch {
        // λ_k → 0 away from the band, so the far end is pushed out until
        // the equation changes sign.
        Branch::Below => {
            if f(hi)? <= 0.0 {
                return Ok(None);
            }
            while f(lo)? >= 0.0 {
                lo -= width;
            }
        }
        Branch::Above => {
            if f(lo)? <= 0.0 {
                return Ok(None);
            }
            while f(hi)? >= 0.0 {
                hi += width;
            }
        }
        Branch::Inner => {
            if f(lo)?.signum() == f(hi)?.signum() {
                return Ok(None);
            }
        }
    }
    let Root { z, .. } = bisect(f, lo, hi, 0.0, 4000)?;
    let multiplicity = match (branch, k) {
        (Branch::Inner, _) => 2,
        (_, 0) => 1,
        _ => 2,
    };
    Ok(Some(ExactEigenvalue {
        branch,
        k,
        xi: z,
        multiplicity,
        equation_residual: (lambda_k(p, k, z)? - 1.0).abs(),
        residual_vs_oracle: None,
    }))
}

/// `Π_k (1 - λ_k(z))^{m_k}` with `m_0 = 1` and `m_k = 2` for `k ≥ 1` (the
/// `±k` modes). Truncated once a factor is within `trunc_tol` of 1.
pub fn d_product(p: &ExactParams, z: f64, trunc_tol: f64) -> Result<f64> {
    let d = delta_closed(p, z)?;
    if d == 0.0 || !d.is_finite() {
        return Err(Error::Domain(format!("z = {z} is a band edge of the essential spectrum")));
    }
    let mut prod = 1.0 - lambda_k(p, 0, z)?;
    for k in 1..1_000_000u32 {
        let l = lambda_k(p, k, z)?;
        let f = 1.0 - l;
        prod *= f * f;
        if l.abs() < trunc_tol {
            return Ok(prod);
        }
    }
    Err(Error::Convergence(format!("product at z = {z} did not reach tolerance {trunc_tol}")))
}

/// Which real Fourier mode to use for `f1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Cos,
    Sin,
}

/// The closed-form eigenvector `f1 = cos(kx)` or `sin(kx)`,
/// `f2(x, y) = -b (f1(x) + f1(y)) / (2 (ε(x - y) - ξ))`, `f0 = 0`, in oracle
/// coordinates on `grid`.
pub fn eigenvector(p: &ExactParams, k: u32, parity: Parity, xi: f64, grid: &TorusGrid) -> Result<Vec<f64>> {
    off_band(xi)?;
    let kk = f64::from(k);
    let f1: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| match parity {
            Parity::Cos => (kk * x).cos(),
            Parity::Sin => (kk * x).sin(),
        })
        .collect();
    let nodes = grid.nodes();
    let basis = FockGridBasis::new(grid.clone());
    Ok(basis.encode(
        0.0,
        |i| f1[i],
        |j, l| -p.b * (f1[j] + f1[l]) / (2.0 * ((1.0 - (nodes[j] - nodes[l]).cos()) - xi)),
    ))
}

/// All branch solutions for `k = 0..=kmax`.
pub fn exact_table(p: &ExactParams, kmax: u32) -> Result<Vec<ExactEigenvalue>> {
    let mut out = Vec::new();
    for branch in [Branch::Below, Branch::Above, Branch::Inner] {
        for k in 0..=kmax {
            if let Some(e) = solve_branch(p, k, branch)? {
                out.push(e);
            }
        }
    }
    Ok(out)
}

/// Fill `residual_vs_oracle` from the nearest oracle cluster; inner-branch
/// multiplicities are taken from the cluster size.
pub fn attach_oracle(rows: &mut [ExactEigenvalue], clusters: &[Cluster]) {
    for row in rows.iter_mut() {
        let nearest = clusters.iter().min_by(|a, b| (a.value - row.xi).abs().total_cmp(&(b.value - row.xi).abs()));
        if let Some(c) = nearest {
            row.residual_vs_oracle = Some((c.value - row.xi).abs());
            if row.branch == Branch::Inner {
                row.multiplicity = c.multiplicity.min(2) as u8;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, quad};

    fn unit() -> ExactParams {
        ExactParams::new(1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn closed_forms_at_minus_one() {
        let p = unit();
        assert!((delta_closed(&p, -1.0).unwrap() - (2.0 - PI / 3f64.sqrt())).abs() < 1e-15);
        assert!((dk_closed(0, -1.0).unwrap() - 2.0 * PI / 3f64.sqrt()).abs() < 1e-14);
        let want = 2.0 * PI * (2.0 - 3f64.sqrt()) / 3f64.sqrt();
        assert!((dk_closed(1, -1.0).unwrap() - want).abs() < 1e-14);
        assert!(matches!(delta_closed(&p, 1.0), Err(Error::Domain(_))));
        assert!(matches!(dk_closed(2, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn closed_forms_match_quadrature_above_the_band() {
        let g = make_grid(512).unwrap();
        for k in 0..6u32 {
            let q = quad(|t| (f64::from(k) * t).cos() / (1.0 - t.cos() - 3.0), &g).unwrap();
            assert!((q - dk_closed(k, 3.0).unwrap()).abs() < 1e-12, "k = {k}");
        }
        // alternating signs above the band, odd modes positive
        assert!(dk_closed(3, 3.0).unwrap() > 0.0 && dk_closed(2, 3.0).unwrap() < 0.0);
    }

    #[test]
    fn mirror_symmetry_for_unit_level() {
        let p = unit();
        for z in [-3.0, -1.0, -0.2] {
            let a = delta_closed(&p, z).unwrap();
            let b = delta_closed(&p, 2.0 - z).unwrap();
            assert!((a + b).abs() < 1e-13);
        }
        let (lo, hi) = band_edges(&p).unwrap();
        assert!((lo + hi - 2.0).abs() < 1e-12);
        assert!((lo + 0.918_627_781_979_523).abs() < 1e-13);
    }

    #[test]
    fn large_level_pushes_upper_edge() {
        let p = ExactParams::new(10.0, 1.0, 0.0).unwrap();
        let (_, hi) = band_edges(&p).unwrap();
        assert!(hi > 10.0);
        let q = ExactParams::new(-3.0, 1e-3, 0.0).unwrap();
        let (lo, _) = band_edges(&q).unwrap();
        assert!(lo < -3.0 && lo > -3.0 - 1e-5);
    }

    #[test]
    fn below_branch_accumulates_at_emin() {
        let p = unit();
        let (e_min, _) = band_edges(&p).unwrap();
        let mut prev_gap = f64::INFINITY;
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=12 {
            let e = solve_branch(&p, k, Branch::Below).unwrap().unwrap();
            assert!(e.xi > prev && e.xi < e_min);
            assert!(e_min - e.xi < prev_gap);
            // Δ(ξ_k) shrinks like the gap to E_min, so cancellation in the
            // closed form costs digits for large k
            let tol = if k <= 8 { 1e-10 } else { 1e-8 };
            assert!(e.equation_residual <= tol, "k = {k}: {}", e.equation_residual);
            assert_eq!(e.multiplicity, if k == 0 { 1 } else { 2 });
            prev_gap = e_min - e.xi;
            prev = e.xi;
        }
        let xi0 = solve_branch(&p, 0, Branch::Below).unwrap().unwrap().xi;
        assert!((xi0 + 1.608_265_377_364_477).abs() < 1e-12);
    }

    #[test]
    fn branch_parities() {
        let p = unit();
        for k in 0..8 {
            let above = solve_branch(&p, k, Branch::Above).unwrap();
            let inner = solve_branch(&p, k, Branch::Inner).unwrap();
            assert_eq!(above.is_some(), k % 2 == 0, "above, k = {k}");
            assert_eq!(inner.is_some(), k % 2 == 1, "inner, k = {k}");
        }
        // with a = 1 the upper eigenvalues mirror the lower even modes
        let lo = solve_branch(&p, 2, Branch::Below).unwrap().unwrap().xi;
        let hi = solve_branch(&p, 2, Branch::Above).unwrap().unwrap().xi;
        assert!((lo + hi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn product_behaviour() {
        let p = unit();
        assert!(d_product(&p, -0.5, 1e-15).unwrap() > 1.0);
        assert!((d_product(&p, -1e6, 1e-15).unwrap() - 1.0).abs() < 1e-5);
        let xi1 = solve_branch(&p, 1, Branch::Below).unwrap().unwrap().xi;
        assert!(d_product(&p, xi1, 1e-15).unwrap().abs() < 1e-12);
        assert!(matches!(d_product(&p, 1.0, 1e-15), Err(Error::Domain(_))));
    }

    #[test]
    fn eigenvector_shape() {
        let g = make_grid(8).unwrap();
        let v = eigenvector(&unit(), 0, Parity::Cos, -1.6, &g).unwrap();
        assert_eq!(v[0], 0.0);
        let h = g.weight();
        assert!((v[1] - h.sqrt()).abs() < 1e-15);
        let b = FockGridBasis::new(g.clone());
        let want = h * (-1.0 / (0.0 + 1.6));
        assert!((v[b.pair(3, 3)] - want).abs() < 1e-15);
        assert!(eigenvector(&unit(), 1, Parity::Sin, 1.0, &g).is_err());
    }

    #[test]
    fn branch_labels_serialize_as_numbers() {
        let e = solve_branch(&unit(), 0, Branch::Below).unwrap().unwrap();
        let text = serde_json::to_string(&e).unwrap();
        assert!(text.contains("\"branch\":1"));
        let back: ExactEigenvalue = serde_json::from_str(&text).unwrap();
        assert_eq!(back, e);
    }
}
