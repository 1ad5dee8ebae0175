//! Eigenvalue counting below `z` through the Birman–Schwinger operator
//! `T(z)`: the number of eigenvalues of `H` in `(-∞, z)` equals the number of
//! eigenvalues of `T(z)` above 1.
//!
//! Coordinates are weight-scaled (`g_j ↦ √h g(x_j)`), which makes the
//! discrete operator symmetric. With `Δ` taken by the same midpoint rule the
//! discrete `I - T(z)` is congruent to the Schur complement of `H - z` on the
//! two-particle block, so at matched grids the count agrees exactly with the
//! direct discretisation by Sylvester's law of inertia.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::friedrichs::DeltaEvaluator;
use crate::linalg::{count_above_sorted, sym_eigenvalues};

/// Eigenvalues of `T(z)` above `1 - TOP_MARGIN` are kept for diagnostics.
pub const TOP_MARGIN: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct BsMatrix {
    pub z: f64,
    pub matrix: Mat<f64>,
}

impl BsMatrix {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsCount {
    pub z: f64,
    pub count: usize,
    pub borderline_flags: Vec<f64>,
    /// Descending.
    pub top_eigenvalues: Vec<f64>,
}

/// Counter bound to one evaluator and the bottom of its essential spectrum.
#[derive(Debug)]
pub struct BirmanSchwinger<'a> {
    eval: &'a DeltaEvaluator,
    e_min: f64,
}

impl<'a> BirmanSchwinger<'a> {
    /// Computes `E_min` from the essential spectrum of the evaluator's model.
    pub fn new(eval: &'a DeltaEvaluator) -> Result<Self> {
        let e_min = eval.essential_spectrum()?.e_min;
        Ok(Self { eval, e_min })
    }

    pub fn with_e_min(eval: &'a DeltaEvaluator, e_min: f64) -> Self {
        Self { eval, e_min }
    }

    pub fn e_min(&self) -> f64 {
        self.e_min
    }

    pub fn assemble(&self, z: f64) -> Result<BsMatrix> {
        let tols = self.eval.tolerances();
        if !(z < self.e_min - tols.sign_tol) {
            return Err(Error::Domain(format!("z = {z} is not below E_min = {}", self.e_min)));
        }
        let model = self.eval.model();
        let grid = self.eval.grid();
        let n = grid.n();
        let h = grid.weight();
        let sh = h.sqrt();

        let mut root = Vec::with_capacity(n);
        for j in 0..n {
            let d = self.eval.delta_on_grid(j, z);
            if !(d > 0.0) {
                return Err(Error::PositivityViolation { node: j, x: grid.node(j), value: d });
            }
            root.push(d.sqrt());
        }
        let v1: Vec<f64> = grid.nodes().iter().map(|&x| model.v1(x)).collect();

        let mut t = Mat::<f64>::zeros(n + 1, n + 1);
        t[(0, 0)] = 1.0 + z - model.w0();
        for j in 0..n {
            let r = -sh * model.v0(grid.node(j)) / root[j];
            t[(j + 1, 0)] = r;
            t[(0, j + 1)] = r;
        }
        for i in 0..n {
            let xi = grid.node(i);
            for j in 0..=i {
                let k = h * v1[i] * v1[j] / (2.0 * root[i] * (model.w2(xi, grid.node(j)) - z) * root[j]);
                t[(i + 1, j + 1)] = k;
                t[(j + 1, i + 1)] = k;
            }
        }
        Ok(BsMatrix { z, matrix: t })
    }

    pub fn count(&self, z: f64) -> Result<BsCount> {
        let t = self.assemble(z)?;
        let eigs = sym_eigenvalues(&t.matrix)?;
        let c = count_above_sorted(&eigs, 1.0, self.eval.tolerances().eig_tol);
        let top_eigenvalues = eigs.iter().rev().copied().take_while(|&e| e > 1.0 - TOP_MARGIN).collect();
        Ok(BsCount { z, count: c.count, borderline_flags: c.borderline, top_eigenvalues })
    }
}

/// One-shot count: computes `E_min` and then `N(z)`.
pub fn count_eigs_below(eval: &DeltaEvaluator, z: f64) -> Result<BsCount> {
    BirmanSchwinger::new(eval)?.count(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::linalg::asymmetry;
    use crate::model::{builtin, Family, ModelSpec};
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn decoupled_matrix_is_diagonal() {
        let m = ModelSpec::new(
            "free",
            0.5,
            Arc::new(|x: f64| 2.0 - x.cos()),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Arc::new(|x: f64, y: f64| 2.0 - x.cos() - y.cos()),
        )
        .unwrap();
        let e = DeltaEvaluator::new(m, make_grid(16).unwrap());
        let bs = BirmanSchwinger::new(&e).unwrap();
        let t = bs.assemble(-1.0).unwrap();
        assert_eq!(t.size(), 17);
        assert_eq!(t.matrix[(0, 0)], 1.0 - 1.0 - 0.5);
        for i in 0..17 {
            for j in 0..17 {
                if (i, j) != (0, 0) {
                    assert_eq!(t.matrix[(i, j)], 0.0);
                }
            }
        }
        assert_eq!(bs.count(-1.0).unwrap().count, 0);
    }

    #[test]
    fn rejects_z_above_emin() {
        let e = DeltaEvaluator::new(builtin(&Family::Exact { a: 1.0, b: 1.0, w0: 0.0 }).unwrap(), make_grid(32).unwrap());
        let bs = BirmanSchwinger::new(&e).unwrap();
        assert!(matches!(bs.count(-0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn far_below_everything_counts_zero() {
        let e = DeltaEvaluator::new(builtin(&Family::CaseII { mu: 0.9 / std::f64::consts::PI }).unwrap(), make_grid(32).unwrap());
        assert_eq!(count_eigs_below(&e, -1e4).unwrap().count, 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn count_is_monotone_in_z(z1 in -4.0f64..-1.0, gap in 0.0f64..2.0) {
            let e = DeltaEvaluator::new(builtin(&Family::Exact { a: 1.0, b: 1.0, w0: 0.0 }).unwrap(), make_grid(32).unwrap());
            let bs = BirmanSchwinger::with_e_min(&e, -0.918_627_781_979_523);
            let z2 = (z1 + gap).min(-0.95);
            prop_assume!(z2 >= z1);
            let t = bs.assemble(z1).unwrap();
            prop_assert!(asymmetry(&t.matrix) <= 1e-13);
            prop_assert!(bs.count(z1).unwrap().count <= bs.count(z2).unwrap().count);
        }
    }
}
