//! Brute-force discretisation of `H` on the truncated Fock space.
//!
//! Basis: the vacuum, one-particle node functions and symmetric two-particle
//! pair functions, all orthonormal for the quadrature inner product. A state
//! `(f0, f1, f2)` has coordinates
//! `f0`, `√h f1(x_i)`, `h f2(x_j, x_j)` and `√2 h f2(x_j, x_k)` for `j < k`.

use faer::Mat;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::linalg::{cluster, sym_eigenvalues, Cluster};
use crate::model::ModelSpec;

/// Largest matrix dimension the oracle agrees to build.
pub const MAX_DIM: usize = 20_000;

/// Relative gap below which eigenvalues are merged into one cluster.
pub const CLUSTER_REL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct FockGridBasis {
    grid: TorusGrid,
    dim: usize,
}

impl FockGridBasis {
    pub fn new(grid: TorusGrid) -> Self {
        let dim = Self::dim_for(grid.n());
        Self { grid, dim }
    }

    pub fn dim_for(n: usize) -> usize {
        1 + n + n * (n + 1) / 2
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn one(&self, i: usize) -> usize {
        1 + i
    }

    /// Index of the pair `{j, k}` (order irrelevant). Row `j` of the upper
    /// triangle starts after `j n - j (j - 1) / 2` earlier pairs.
    pub fn pair(&self, j: usize, k: usize) -> usize {
        let (j, k) = if j <= k { (j, k) } else { (k, j) };
        let n = self.n();
        1 + n + j * n - j * j.saturating_sub(1) / 2 + (k - j)
    }

    /// Coordinates of `(f0, f1, f2)` given node samples.
    pub fn encode(&self, f0: f64, f1: impl Fn(usize) -> f64, f2: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        let n = self.n();
        let h = self.grid.weight();
        let sh = h.sqrt();
        let mut out = vec![0.0; self.dim];
        out[0] = f0;
        for i in 0..n {
            out[self.one(i)] = sh * f1(i);
        }
        for j in 0..n {
            out[self.pair(j, j)] = h * f2(j, j);
            for k in (j + 1)..n {
                out[self.pair(j, k)] = std::f64::consts::SQRT_2 * h * f2(j, k);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteH {
    pub basis: FockGridBasis,
    pub matrix: Mat<f64>,
}

/// Assemble the symmetric matrix of `H` in the orthonormal pair basis.
pub fn assemble_h(model: &ModelSpec, grid: &TorusGrid) -> Result<DiscreteH> {
    let basis = FockGridBasis::new(grid.clone());
    let dim = basis.dim();
    if dim > MAX_DIM {
        return Err(Error::ResourceGuard(format!(
            "oracle dimension {dim} for n = {} exceeds the limit {MAX_DIM}",
            grid.n()
        )));
    }
    let n = grid.n();
    let sh = grid.weight().sqrt();
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let v1: Vec<f64> = grid.nodes().iter().map(|&x| model.v1(x)).collect();

    let mut a = Mat::<f64>::zeros(dim, dim);
    let mut set = |i: usize, j: usize, v: f64| -> Result<()> {
        if !v.is_finite() {
            return Err(Error::NonFinite { node: i.min(j), x: f64::NAN, value: v });
        }
        a[(i, j)] = v;
        a[(j, i)] = v;
        Ok(())
    };
    set(0, 0, model.w0())?;
    for i in 0..n {
        let x = grid.node(i);
        set(0, basis.one(i), sh * model.v0(x))?;
        set(basis.one(i), basis.one(i), model.w1(x))?;
    }
    for j in 0..n {
        let xj = grid.node(j);
        let p = basis.pair(j, j);
        set(p, p, model.w2(xj, xj))?;
        set(basis.one(j), p, sh * v1[j])?;
        for k in (j + 1)..n {
            let p = basis.pair(j, k);
            set(p, p, model.w2(xj, grid.node(k)))?;
            set(basis.one(j), p, sh * v1[k] * inv_sqrt2)?;
            set(basis.one(k), p, sh * v1[j] * inv_sqrt2)?;
        }
    }
    Ok(DiscreteH { basis, matrix: a })
}

impl DiscreteH {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        sym_eigenvalues(&self.matrix)
    }

    /// `‖H v - λ v‖ / ‖v‖`.
    pub fn residual(&self, v: &[f64], lambda: f64) -> Result<f64> {
        residual(self, v, lambda)
    }
}

/// All eigenvalues below `z`, ascending, with multiplicity.
pub fn eigs_below(h: &DiscreteH, z: f64) -> Result<Vec<f64>> {
    Ok(h.eigenvalues()?.into_iter().take_while(|&e| e < z).collect())
}

/// Cluster eigenvalues with the oracle's default threshold.
pub fn clusters(sorted: &[f64]) -> Vec<Cluster> {
    cluster(sorted, CLUSTER_REL)
}

pub fn residual(h: &DiscreteH, v: &[f64], lambda: f64) -> Result<f64> {
    let dim = h.dim();
    if v.len() != dim {
        return Err(Error::InvalidArgument(format!("vector has length {}, basis has {dim}", v.len())));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Domain("residual of the zero vector".into()));
    }
    let mut acc = 0.0;
    let mut hv = vec![0.0; dim];
    for j in 0..dim {
        let vj = v[j];
        if vj == 0.0 {
            continue;
        }
        let col = h.matrix.col(j);
        for (i, slot) in hv.iter_mut().enumerate() {
            *slot += col[i] * vj;
        }
    }
    for i in 0..dim {
        let r = hv[i] - lambda * v[i];
        acc += r * r;
    }
    Ok(acc.sqrt() / norm)
}

/// Build the discretisation on the full tensor grid (two-particle
/// coordinates `h f2(x_a, x_b)` for all ordered pairs), compress it onto the
/// symmetric sector and return the largest deviation from [`assemble_h`].
pub fn tensor_compression_deviation(model: &ModelSpec, grid: &TorusGrid) -> Result<f64> {
    let n = grid.n();
    let full_dim = 1 + n + n * n;
    if full_dim > 4000 {
        return Err(Error::ResourceGuard(format!("tensor check needs a small grid, got n = {n}")));
    }
    let sh = grid.weight().sqrt();
    let full_pair = |a: usize, b: usize| 1 + n + a * n + b;
    let mut f = Mat::<f64>::zeros(full_dim, full_dim);
    f[(0, 0)] = model.w0();
    for i in 0..n {
        let x = grid.node(i);
        f[(0, 1 + i)] = sh * model.v0(x);
        f[(1 + i, 0)] = sh * model.v0(x);
        f[(1 + i, 1 + i)] = model.w1(x);
        // the creation part attaches the new particle as the second variable
        for b in 0..n {
            let v = sh * model.v1(grid.node(b));
            f[(1 + i, full_pair(i, b))] = v;
            f[(full_pair(i, b), 1 + i)] = v;
        }
    }
    for a in 0..n {
        for b in 0..n {
            let p = full_pair(a, b);
            f[(p, p)] = model.w2(grid.node(a), grid.node(b));
        }
    }

    let h = assemble_h(model, grid)?;
    let basis = &h.basis;
    let mut jmat = Mat::<f64>::zeros(full_dim, basis.dim());
    for i in 0..=n {
        jmat[(i, i)] = 1.0;
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..n {
        jmat[(full_pair(a, a), basis.pair(a, a))] = 1.0;
        for b in (a + 1)..n {
            jmat[(full_pair(a, b), basis.pair(a, b))] = s;
            jmat[(full_pair(b, a), basis.pair(a, b))] = s;
        }
    }
    let compressed = jmat.transpose() * &f * &jmat;
    let mut worst = 0.0f64;
    for j in 0..basis.dim() {
        for i in 0..basis.dim() {
            worst = worst.max((compressed[(i, j)] - h.matrix[(i, j)]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::model::{builtin, Family, Profile};
    use std::collections::HashSet;
    use std::sync::Arc;

    #[test]
    fn pair_indices_fill_the_triangle() {
        let b = FockGridBasis::new(make_grid(7).unwrap());
        let mut seen = HashSet::new();
        for j in 0..7 {
            for k in j..7 {
                let p = b.pair(j, k);
                assert_eq!(p, b.pair(k, j));
                assert!(p >= 8 && p < b.dim());
                assert!(seen.insert(p));
            }
        }
        assert_eq!(seen.len(), 28);
    }

    #[test]
    fn decoupled_spectrum_is_the_diagonal() {
        let m = ModelSpec::new(
            "free",
            0.25,
            Arc::new(|x: f64| 2.0 - x.cos()),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Arc::new(|x: f64, y: f64| 2.0 - x.cos() - y.cos()),
        )
        .unwrap();
        let h = assemble_h(&m, &make_grid(6).unwrap()).unwrap();
        let mut diag: Vec<f64> = (0..h.dim()).map(|i| h.matrix[(i, i)]).collect();
        diag.sort_by(f64::total_cmp);
        let ev = h.eigenvalues().unwrap();
        for (a, b) in diag.iter().zip(&ev) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(eigs_below(&h, 0.25 + 1e-9).unwrap(), vec![0.25]);
        assert!(eigs_below(&h, 0.0).unwrap().is_empty());
    }

    #[test]
    fn vacuum_level_is_an_eigenvalue_without_vacuum_coupling() {
        let m = builtin(&Family::Exact { a: 1.0, b: 1.0, w0: 0.0 }).unwrap();
        let h = assemble_h(&m, &make_grid(12).unwrap()).unwrap();
        let mut e0 = vec![0.0; h.dim()];
        e0[0] = 1.0;
        assert_eq!(h.residual(&e0, 0.0).unwrap(), 0.0);
        let zero = vec![0.0; h.dim()];
        assert!(matches!(h.residual(&zero, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn compression_of_tensor_grid_matches() {
        let g = make_grid(8).unwrap();
        for f in [
            Family::Exact { a: 1.0, b: 0.7, w0: 0.3 },
            Family::CaseI { l: 2.0, mu: 1.0 },
            Family::SpinBoson { sigma: 1, epsilon: 1.0, alpha: 0.8, w: Profile::OneMinusCos, v: Profile::OnePlusSin },
        ] {
            let dev = tensor_compression_deviation(&builtin(&f).unwrap(), &g).unwrap();
            assert!(dev <= 1e-13, "{f:?}: {dev}");
        }
    }

    #[test]
    fn resource_guard_refuses_huge_grids() {
        let m = builtin(&Family::CaseII { mu: 0.3 }).unwrap();
        assert!(matches!(assemble_h(&m, &make_grid(200).unwrap()), Err(Error::ResourceGuard(_))));
    }

    #[test]
    fn encode_preserves_the_quadrature_norm() {
        let g = make_grid(10).unwrap();
        let b = FockGridBasis::new(g.clone());
        let v = b.encode(0.5, |i| g.node(i).cos(), |j, k| (g.node(j) + g.node(k)).sin());
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        let h = g.weight();
        let mut want = 0.25;
        for i in 0..10 {
            want += h * g.node(i).cos().powi(2);
            for k in 0..10 {
                want += h * h * (g.node(i) + g.node(k)).sin().powi(2);
            }
        }
        assert!((norm2 - want).abs() < 1e-12);
    }
}
