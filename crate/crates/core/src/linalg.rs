//! Dense symmetric eigenproblems, threshold counting and clustering.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use faer::Mat as DenseMatrix;

/// Largest `|a_ij - a_ji|`.
pub fn asymmetry(a: &Mat<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

fn check_square_finite(a: &Mat<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidArgument(format!("matrix is {}x{}, not square", a.nrows(), a.ncols())));
    }
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let v = a[(i, j)];
            if !v.is_finite() {
                return Err(Error::Eigensolver(format!("non-finite entry {v} at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// All eigenvalues of a symmetric matrix, ascending. Only the lower triangle
/// is read.
pub fn sym_eigenvalues(a: &Mat<f64>) -> Result<Vec<f64>> {
    check_square_finite(a)?;
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut ev = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Eigenvalues (ascending) and the matching orthonormal eigenvectors as
/// columns.
pub fn sym_eigen(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    check_square_finite(a)?;
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((values, evd.U().to_owned()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountAbove {
    pub count: usize,
    /// Eigenvalues within `eig_tol` of the threshold; never counted.
    pub borderline: Vec<f64>,
}

/// Count eigenvalues strictly above `lambda + eig_tol`, flagging those
/// within `eig_tol` of `lambda`.
pub fn count_above_sorted(eigs: &[f64], lambda: f64, eig_tol: f64) -> CountAbove {
    let count = eigs.iter().filter(|&&e| e > lambda + eig_tol).count();
    let borderline = eigs.iter().copied().filter(|e| (e - lambda).abs() <= eig_tol).collect();
    CountAbove { count, borderline }
}

pub fn count_above(a: &Mat<f64>, lambda: f64, eig_tol: f64) -> Result<CountAbove> {
    Ok(count_above_sorted(&sym_eigenvalues(a)?, lambda, eig_tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub value: f64,
    pub multiplicity: usize,
    /// Largest minus smallest member.
    pub spread: f64,
}

/// Group ascending eigenvalues whose neighbours lie closer than
/// `rel · (1 + |λ|)`.
pub fn cluster(sorted: &[f64], rel: f64) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        let split = i == sorted.len() || sorted[i] - sorted[i - 1] >= rel * (1.0 + sorted[i].abs());
        if split && start < sorted.len() {
            let part = &sorted[start..i];
            out.push(Cluster {
                value: part.iter().sum::<f64>() / part.len() as f64,
                multiplicity: part.len(),
                spread: part[part.len() - 1] - part[0],
            });
            start = i;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_counts() {
        let a = Mat::<f64>::identity(5, 5);
        assert_eq!(count_above(&a, 0.5, 1e-10).unwrap().count, 5);
    }

    #[test]
    fn exact_threshold_is_not_counted() {
        let mut a = Mat::<f64>::zeros(3, 3);
        a[(0, 0)] = 2.0;
        a[(1, 1)] = 1.0;
        let c = count_above(&a, 1.0, 1e-10).unwrap();
        assert_eq!(c.count, 1);
        assert_eq!(c.borderline, vec![1.0]);
    }

    #[test]
    fn random_symmetric_all_above_minus_infinity() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let mut a = Mat::<f64>::zeros(10, 10);
        for i in 0..10 {
            for j in 0..=i {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        assert_eq!(asymmetry(&a), 0.0);
        assert_eq!(count_above(&a, -1e9, 1e-10).unwrap().count, 10);
        let (vals, vecs) = sym_eigen(&a).unwrap();
        let ev = sym_eigenvalues(&a).unwrap();
        for (p, q) in vals.iter().zip(&ev) {
            assert!((p - q).abs() < 1e-12);
        }
        // A u = λ u for the first pair
        let u = vecs.col(0);
        for i in 0..10 {
            let mut s = 0.0;
            for j in 0..10 {
                s += a[(i, j)] * u[j];
            }
            assert!((s - vals[0] * u[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn clustering_groups_near_equal_values() {
        let c = cluster(&[-3.0, -2.0, -2.0 + 1e-9, 1.0], 1e-7);
        let mult: Vec<usize> = c.iter().map(|c| c.multiplicity).collect();
        assert_eq!(mult, vec![1, 2, 1]);
        assert!(cluster(&[], 1e-7).is_empty());
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = Mat::<f64>::zeros(2, 2);
        a[(1, 0)] = f64::NAN;
        assert!(matches!(sym_eigenvalues(&a), Err(Error::Eigensolver(_))));
    }
}
