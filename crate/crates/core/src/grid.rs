//! Uniform midpoint grid on the torus `[-π, π)`.
//!
//! The midpoint rule with equal weights `2π/n` is spectrally accurate for
//! smooth periodic integrands, which is all this crate ever feeds it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    n: usize,
    nodes: Vec<f64>,
    weight: f64,
}

impl TorusGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("grid needs at least 2 nodes, got {n}")));
        }
        let weight = 2.0 * PI / n as f64;
        let nodes = (0..n).map(|j| -PI + (j as f64 + 0.5) * weight).collect();
        Ok(Self { n, nodes, weight })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Common quadrature weight `2π/n`.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Index of the node bitwise equal to `x`, if any.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let guess = ((x + PI) / self.weight - 0.5).round();
        if !(0.0..self.n as f64).contains(&guess) {
            return None;
        }
        let j = guess as usize;
        (self.nodes[j] == x).then_some(j)
    }
}

/// Convenience constructor mirroring [`TorusGrid::new`].
pub fn make_grid(n: usize) -> Result<TorusGrid> {
    TorusGrid::new(n)
}

/// Midpoint-rule integral over the torus, summed left to right.
pub fn quad<F: Fn(f64) -> f64>(f: F, grid: &TorusGrid) -> Result<f64> {
    let mut acc = 0.0;
    for (node, &x) in grid.nodes().iter().enumerate() {
        let value = f(x);
        if !value.is_finite() {
            return Err(Error::NonFinite { node, x, value });
        }
        acc += value;
    }
    Ok(acc * grid.weight)
}

/// Wrap an angle into `[-π, π)`.
pub fn wrap(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let y = (x + PI).rem_euclid(two_pi) - PI;
    if y >= PI {
        y - two_pi
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(matches!(make_grid(0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(1), Err(Error::InvalidArgument(_))));
        assert!(make_grid(2).is_ok());
    }

    #[test]
    fn constant_integrates_to_torus_length() {
        let g = make_grid(7).unwrap();
        assert!((quad(|_| 1.0, &g).unwrap() - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn reports_offending_node() {
        let g = make_grid(4).unwrap();
        let bad = g.node(2);
        let err = quad(|x| if x == bad { f64::NAN } else { 1.0 }, &g).unwrap_err();
        assert!(matches!(err, Error::NonFinite { node: 2, .. }));
    }

    #[test]
    fn node_lookup_round_trips() {
        let g = make_grid(33).unwrap();
        for (j, &x) in g.nodes().iter().enumerate() {
            assert_eq!(g.index_of(x), Some(j));
        }
        assert_eq!(g.index_of(0.123), None);
    }

    proptest! {
        // The midpoint rule integrates e^{ikx} exactly for 0 < |k| < n.
        #[test]
        fn trig_polynomials_are_exact(n in 4usize..200, k in 1usize..400) {
            let g = make_grid(n).unwrap();
            let kk = k as f64;
            let c = quad(|x| (kk * x).cos(), &g).unwrap();
            let s = quad(|x| (kk * x).sin(), &g).unwrap();
            prop_assert!(s.abs() < 1e-11);
            if k % n != 0 {
                prop_assert!(c.abs() < 1e-11);
            }
        }

        #[test]
        fn wrap_lands_in_fundamental_domain(x in -100.0f64..100.0) {
            let y = wrap(x);
            prop_assert!((-PI..PI).contains(&y));
            let turns = (x - y) / (2.0 * PI);
            prop_assert!((turns - turns.round()).abs() < 1e-9);
        }
    }
}
