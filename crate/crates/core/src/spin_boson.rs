//! Two-photon truncation `A2` of the lattice spin-boson Hamiltonian. The
//! permutation `Φ` splits it into two copies `A2(σ)`, `σ = ±`, of the
//! three-block model, so the whole fiber and counting machinery applies per
//! spin sector.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::birman_schwinger::BirmanSchwinger;
use crate::error::{Error, Result};
use crate::extrema::vanishing_order;
use crate::friedrichs::{Classification, DeltaEvaluator, EssentialSpectrumReport, Tolerances};
use crate::grid::TorusGrid;
use crate::linalg::sym_eigenvalues;
use crate::model::{builtin, Family, ModelSpec, Profile};
use crate::oracle::{assemble_h, FockGridBasis};
use crate::quadrature::{graded_periodic, GradePoint};
use crate::REPORT_FORMAT;

/// Offsets below `E_min` at which the report counts eigenvalues.
pub const Z_LADDER: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
/// The doubled matrix is only assembled up to this grid size.
pub const PHI_MAX_N: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinBosonParams {
    pub epsilon: f64,
    pub alpha: f64,
    pub w: Profile,
    pub v: Profile,
}

impl SpinBosonParams {
    pub fn new(epsilon: f64, alpha: f64, w: Profile, v: Profile) -> Result<Self> {
        for (name, x) in [("epsilon", epsilon), ("alpha", alpha)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {x}")));
            }
        }
        if w.eval(0.0) != 0.0 {
            return Err(Error::InvalidArgument(format!("dispersion `{}` does not vanish at 0", w.name())));
        }
        Ok(Self { epsilon, alpha, w, v })
    }

    /// `ε = 1`, `w = 1 - cos`, `v = sin`.
    pub fn default_profile(alpha: f64) -> Result<Self> {
        Self::new(1.0, alpha, Profile::OneMinusCos, Profile::Sin)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.epsilon, alpha, self.w, self.v)
    }

    /// Check that `w` has its unique zero at 0 on the grid nodes.
    pub fn validate_on(&self, grid: &TorusGrid) -> Result<()> {
        for (j, &x) in grid.nodes().iter().enumerate() {
            let w = self.w.eval(x);
            if !(w > 0.0) {
                return Err(Error::PositivityViolation { node: j, x, value: w });
            }
        }
        Ok(())
    }

    pub fn family(&self, sigma: i8) -> Family {
        Family::SpinBoson { sigma, epsilon: self.epsilon, alpha: self.alpha, w: self.w, v: self.v }
    }
}

/// The sector model `A2(σ)`: `w0 = σε`, `w1 = -σε + w`, `v0 = v1 = α v`,
/// `w2(x, y) = σε + w(x) + w(y)`.
pub fn to_model(p: &SpinBosonParams, sigma: i8) -> Result<ModelSpec> {
    builtin(&p.family(sigma))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alpha0 {
    /// Absent when `∫ v² / w` diverges.
    pub value: Option<f64>,
    pub divergent: bool,
    pub order_v: u32,
    pub order_w: u32,
}

/// Critical coupling `α0 = 2 √ε (∫ v² / w)^{-1/2}`. The integral diverges
/// exactly when `2 ord(v) < ord(w)` at the zero of `w`.
pub fn alpha0(p: &SpinBosonParams) -> Result<Alpha0> {
    let (w, v) = (p.w, p.v);
    let order_w = vanishing_order(|t| w.eval(t), 0.0)?;
    let order_v = vanishing_order(|t| v.eval(t), 0.0)?;
    if 2 * order_v < order_w {
        return Ok(Alpha0 { value: None, divergent: true, order_v, order_w });
    }
    let integral = graded_periodic(
        |t| {
            let wt = w.eval(t);
            if wt == 0.0 {
                0.0
            } else {
                v.eval(t).powi(2) / wt
            }
        },
        &[GradePoint { center: 0.0, inner: 1e-5, coarse_core: true }],
    )?;
    if !(integral > 0.0) {
        return Err(Error::EstimationFailed(format!("∫ v² / w = {integral} is not positive")));
    }
    Ok(Alpha0 { value: Some(2.0 * p.epsilon.sqrt() / integral.sqrt()), divergent: false, order_v, order_w })
}

/// Index layout of the discretised `A2` in the order
/// `(f0+, f0-, f1+, f1-, f2+, f2-)`.
#[derive(Debug, Clone)]
pub struct A2Basis {
    sector: FockGridBasis,
}

impl A2Basis {
    pub fn new(grid: TorusGrid) -> Self {
        Self { sector: FockGridBasis::new(grid) }
    }

    pub fn dim(&self) -> usize {
        2 * self.sector.dim()
    }

    fn s(sigma: i8) -> usize {
        usize::from(sigma < 0)
    }

    pub fn vacuum(&self, sigma: i8) -> usize {
        Self::s(sigma)
    }

    pub fn one(&self, sigma: i8, i: usize) -> usize {
        2 + Self::s(sigma) * self.sector.n() + i
    }

    pub fn pair(&self, sigma: i8, j: usize, k: usize) -> usize {
        let n = self.sector.n();
        let pairs = self.sector.dim() - 1 - n;
        2 + 2 * n + Self::s(sigma) * pairs + (self.sector.pair(j, k) - 1 - n)
    }

    /// Position after `Φ`: sector `σ` occupies the first half for `+` and
    /// the second for `-`, holding `(f0(σ), f1(-σ), f2(σ))`.
    pub fn phi(&self, index: usize) -> usize {
        let n = self.sector.n();
        let d = self.sector.dim();
        let pairs = d - 1 - n;
        let (sector, local) = if index < 2 {
            (index, 0)
        } else if index < 2 + 2 * n {
            let r = index - 2;
            // f1(σ) lands in the block of -σ
            (1 - r / n, self.sector.one(r % n))
        } else {
            let r = index - 2 - 2 * n;
            (r / pairs, 1 + n + r % pairs)
        };
        sector * d + local
    }
}

/// Assemble `A2` on the grid with the spin index explicit.
pub fn assemble_a2(p: &SpinBosonParams, grid: &TorusGrid) -> Result<(A2Basis, Mat<f64>)> {
    if grid.n() > PHI_MAX_N {
        return Err(Error::ResourceGuard(format!("the doubled matrix needs n ≤ {PHI_MAX_N}, got {}", grid.n())));
    }
    let basis = A2Basis::new(grid.clone());
    let dim = basis.dim();
    let n = grid.n();
    let sh = grid.weight().sqrt();
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let (eps, alpha, w, v) = (p.epsilon, p.alpha, p.w, p.v);
    let coupling: Vec<f64> = grid.nodes().iter().map(|&x| alpha * v.eval(x)).collect();

    let mut a = Mat::<f64>::zeros(dim, dim);
    let mut set = |i: usize, j: usize, val: f64| {
        a[(i, j)] = val;
        a[(j, i)] = val;
    };
    for sigma in [1i8, -1] {
        let se = f64::from(sigma) * eps;
        set(basis.vacuum(sigma), basis.vacuum(sigma), se);
        for i in 0..n {
            let x = grid.node(i);
            set(basis.vacuum(sigma), basis.one(-sigma, i), sh * coupling[i]);
            set(basis.one(sigma, i), basis.one(sigma, i), se + w.eval(x));
        }
        for j in 0..n {
            let xj = grid.node(j);
            let q = basis.pair(sigma, j, j);
            set(q, q, se + w.eval(xj) + w.eval(xj));
            set(basis.one(-sigma, j), q, sh * coupling[j]);
            for k in (j + 1)..n {
                let q = basis.pair(sigma, j, k);
                let xk = grid.node(k);
                set(q, q, se + w.eval(xj) + w.eval(xk));
                set(basis.one(-sigma, j), q, sh * coupling[k] * inv_sqrt2);
                set(basis.one(-sigma, k), q, sh * coupling[j] * inv_sqrt2);
            }
        }
    }
    Ok((basis, a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiCheck {
    /// Largest entry of `Φ A2 Φ⁻¹` outside the two diagonal blocks.
    pub off_block: f64,
    /// Largest difference between a diagonal block and the sector oracle.
    pub block_mismatch: f64,
}

fn permuted(basis: &A2Basis, a: &Mat<f64>) -> Mat<f64> {
    let dim = basis.dim();
    let perm: Vec<usize> = (0..dim).map(|i| basis.phi(i)).collect();
    let mut b = Mat::<f64>::zeros(dim, dim);
    for j in 0..dim {
        for i in 0..dim {
            b[(perm[i], perm[j])] = a[(i, j)];
        }
    }
    b
}

/// Apply `Φ` to the discretised `A2` and compare with `diag(A2(+), A2(-))`.
pub fn phi_decomposition_check(p: &SpinBosonParams, grid: &TorusGrid) -> Result<PhiCheck> {
    let (basis, a) = assemble_a2(p, grid)?;
    let b = permuted(&basis, &a);
    let d = basis.sector.dim();
    let mut off_block = 0.0f64;
    for j in 0..2 * d {
        for i in 0..2 * d {
            if (i < d) != (j < d) {
                off_block = off_block.max(b[(i, j)].abs());
            }
        }
    }
    let mut block_mismatch = 0.0f64;
    for (s, sigma) in [1i8, -1].into_iter().enumerate() {
        let h = assemble_h(&to_model(p, sigma)?, grid)?;
        for j in 0..d {
            for i in 0..d {
                block_mismatch = block_mismatch.max((b[(s * d + i, s * d + j)] - h.matrix[(i, j)]).abs());
            }
        }
    }
    Ok(PhiCheck { off_block, block_mismatch })
}

/// Largest gap between the sorted spectrum of `A2` and the sorted union of
/// the sector oracle spectra.
pub fn spectral_union_deviation(p: &SpinBosonParams, grid: &TorusGrid) -> Result<f64> {
    let (_, a) = assemble_a2(p, grid)?;
    let full = sym_eigenvalues(&a)?;
    let mut union = assemble_h(&to_model(p, 1)?, grid)?.eigenvalues()?;
    union.extend(assemble_h(&to_model(p, -1)?, grid)?.eigenvalues()?);
    union.sort_by(f64::total_cmp);
    Ok(full.iter().zip(&union).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderCount {
    pub z: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A2Report {
    pub format: String,
    pub alpha: f64,
    pub alpha0: Option<f64>,
    pub e_min_plus: f64,
    pub e_min_minus: f64,
    pub e_min: f64,
    pub ess_intervals: Vec<[f64; 2]>,
    pub counts_plus: Vec<LadderCount>,
    pub counts_minus: Vec<LadderCount>,
    pub flags: Vec<String>,
}

impl A2Report {
    /// Eigenvalues of `A2` below the deepest ladder point.
    pub fn total_count(&self) -> usize {
        self.counts_plus.first().map_or(0, |c| c.count) + self.counts_minus.first().map_or(0, |c| c.count)
    }

    /// Eigenvalues of `A2` below the ladder point closest to `E_min`.
    pub fn count_near_emin(&self) -> usize {
        self.counts_plus.last().map_or(0, |c| c.count) + self.counts_minus.last().map_or(0, |c| c.count)
    }
}

fn merge(mut v: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    v.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut out: Vec<[f64; 2]> = Vec::new();
    for iv in v {
        match out.last_mut() {
            Some(last) if iv[0] <= last[1] => last[1] = last[1].max(iv[1]),
            _ => out.push(iv),
        }
    }
    out
}

/// Per-sector classification and essential spectrum.
pub fn sector_spectrum(p: &SpinBosonParams, sigma: i8, grid: &TorusGrid) -> Result<EssentialSpectrumReport> {
    DeltaEvaluator::new(to_model(p, sigma)?, grid.clone()).essential_spectrum()
}

/// Essential spectrum, `α0` and sector-attributed eigenvalue counts below
/// `E_min`. On small grids the doubled matrix is also checked against the
/// sector oracles.
pub fn a2_spectrum_report(p: &SpinBosonParams, grid: &TorusGrid) -> Result<A2Report> {
    a2_spectrum_report_with(p, grid, Tolerances::default())
}

pub fn a2_spectrum_report_with(p: &SpinBosonParams, grid: &TorusGrid, tols: Tolerances) -> Result<A2Report> {
    p.validate_on(grid)?;
    let evals = [
        DeltaEvaluator::new(to_model(p, 1)?, grid.clone()).with_tolerances(tols),
        DeltaEvaluator::new(to_model(p, -1)?, grid.clone()).with_tolerances(tols),
    ];
    let ess = [evals[0].essential_spectrum()?, evals[1].essential_spectrum()?];
    let e_min = ess[0].e_min.min(ess[1].e_min);
    let mut intervals = Vec::new();
    for r in &ess {
        intervals.extend(r.sigma_intervals.iter().copied());
        intervals.push(r.band);
    }
    let ess_intervals = merge(intervals);

    let mut flags = Vec::new();
    let a0 = alpha0(p)?;
    if a0.divergent {
        flags.push(format!("alpha0 absent: ∫ v²/w diverges (ord v = {}, ord w = {})", a0.order_v, a0.order_w));
    }
    let mut counts: [Vec<LadderCount>; 2] = [Vec::new(), Vec::new()];
    for (s, eval) in evals.iter().enumerate() {
        let name = if s == 0 { "+" } else { "-" };
        let bs = BirmanSchwinger::with_e_min(eval, ess[s].e_min);
        for off in Z_LADDER {
            let z = e_min - off;
            let c = bs.count(z)?;
            for b in &c.borderline_flags {
                flags.push(format!("sector {name}: T(z) eigenvalue {b} within eig_tol of 1 at z = {z}"));
            }
            counts[s].push(LadderCount { z, count: c.count });
        }
        // eigenvalues of this sector between the global E_min and its own
        // threshold sit inside the other sector's essential spectrum
        if ess[s].e_min > e_min + Z_LADDER[Z_LADDER.len() - 1] {
            let z = ess[s].e_min - Z_LADDER[Z_LADDER.len() - 1];
            let own = bs.count(z)?.count;
            let below = counts[s].last().map_or(0, |c| c.count);
            if own > below {
                flags.push(format!(
                    "sector {name}: {} eigenvalue(s) in [{e_min}, {z}) lie inside the essential spectrum of A2",
                    own - below
                ));
            }
        }
        if matches!(ess[s].classification, Classification::Boundary) {
            flags.push(format!("sector {name}: min Δ(x; m) is zero within sign_tol"));
        }
    }
    if grid.n() <= PHI_MAX_N {
        let dev = spectral_union_deviation(p, grid)?;
        flags.push(format!("spectral union deviation {dev:e}"));
    }
    let [counts_plus, counts_minus] = counts;
    Ok(A2Report {
        format: REPORT_FORMAT.to_string(),
        alpha: p.alpha,
        alpha0: a0.value,
        e_min_plus: ess[0].e_min,
        e_min_minus: ess[1].e_min,
        e_min,
        ess_intervals,
        counts_plus,
        counts_minus,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, quad};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn alpha0_default_profile() {
        let a = alpha0(&SpinBosonParams::default_profile(1.0).unwrap()).unwrap();
        assert_eq!((a.order_v, a.order_w), (1, 2));
        assert!((a.value.unwrap() - 2.0 / (2.0 * PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn alpha0_divergent_for_constant_coupling() {
        let p = SpinBosonParams::new(1.0, 1.0, Profile::OneMinusCos, Profile::One).unwrap();
        let a = alpha0(&p).unwrap();
        assert!(a.divergent && a.value.is_none());
    }

    #[test]
    fn alpha0_scales_with_root_epsilon() {
        let one = alpha0(&SpinBosonParams::default_profile(1.0).unwrap()).unwrap().value.unwrap();
        let four = alpha0(&SpinBosonParams::new(4.0, 1.0, Profile::OneMinusCos, Profile::Sin).unwrap()).unwrap();
        assert!((four.value.unwrap() - 2.0 * one).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_dispersion() {
        assert!(SpinBosonParams::new(1.0, 1.0, Profile::OnePlusSin, Profile::Sin).is_err());
        assert!(SpinBosonParams::new(0.0, 1.0, Profile::OneMinusCos, Profile::Sin).is_err());
    }

    #[test]
    fn sector_bands() {
        let p = SpinBosonParams::default_profile(0.5).unwrap();
        let plus = sector_spectrum(&p, 1, &make_grid(32).unwrap()).unwrap();
        assert!((plus.band[0] - 1.0).abs() < 1e-12 && (plus.band[1] - 5.0).abs() < 1e-12);
        let minus = sector_spectrum(&p, -1, &make_grid(32).unwrap()).unwrap();
        assert!((minus.band[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sector_determinant_matches_direct_formula() {
        let p = SpinBosonParams::default_profile(0.7).unwrap();
        let grid = make_grid(64).unwrap();
        for sigma in [1i8, -1] {
            let eval = DeltaEvaluator::new(to_model(&p, sigma).unwrap(), grid.clone());
            let se = f64::from(sigma);
            for &(x, z) in &[(0.3, -2.5), (-1.1, -3.0), (2.0, -1.7)] {
                let w = |t: f64| 1.0 - t.cos();
                let direct = -se + w(x) - z
                    - 0.5 * 0.49 * quad(|t| t.sin().powi(2) / (se + w(x) + w(t) - z), &grid).unwrap();
                assert!((eval.delta(x, z).unwrap() - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn phi_is_exact_block_permutation() {
        let p = SpinBosonParams::new(1.3, 0.8, Profile::OneMinusCos, Profile::OnePlusSin).unwrap();
        let c = phi_decomposition_check(&p, &make_grid(8).unwrap()).unwrap();
        assert_eq!(c.off_block, 0.0);
        assert_eq!(c.block_mismatch, 0.0);
    }

    #[test]
    fn phi_is_a_permutation() {
        let b = A2Basis::new(make_grid(6).unwrap());
        let mut seen = vec![false; b.dim()];
        for i in 0..b.dim() {
            let j = b.phi(i);
            assert!(!seen[j]);
            seen[j] = true;
        }
    }

    #[test]
    fn doubled_spectrum_is_union_of_sectors() {
        let p = SpinBosonParams::default_profile(1.2).unwrap();
        assert!(spectral_union_deviation(&p, &make_grid(16).unwrap()).unwrap() < 1e-10);
    }

    #[test]
    fn doubled_matrix_guard() {
        let p = SpinBosonParams::default_profile(1.0).unwrap();
        assert!(matches!(assemble_a2(&p, &make_grid(64).unwrap()), Err(Error::ResourceGuard(_))));
    }

    #[test]
    fn report_below_and_above_alpha0() {
        let grid = make_grid(32).unwrap();
        let weak = a2_spectrum_report(&SpinBosonParams::default_profile(0.5).unwrap(), &grid).unwrap();
        assert_eq!(weak.e_min_minus, -1.0);
        assert!(weak.e_min_plus < -1.0);
        let strong = a2_spectrum_report(&SpinBosonParams::default_profile(1.2).unwrap(), &grid).unwrap();
        assert!(strong.e_min_minus < -1.0);
        for r in [&weak, &strong] {
            assert!(r.e_min < -1.0);
            assert!(r.ess_intervals.iter().any(|iv| iv[0] <= -1.0 && iv[1] >= 1.0));
            assert!(r.ess_intervals.iter().any(|iv| iv[0] <= 1.0 && iv[1] >= 5.0));
            assert!(r.flags.iter().any(|f| f.starts_with("spectral union deviation")));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn phi_check_exact_for_random_params(eps in 0.1f64..3.0, alpha in 0.05f64..4.0, sin_v in proptest::bool::ANY) {
            let v = if sin_v { Profile::Sin } else { Profile::OnePlusSin };
            let p = SpinBosonParams::new(eps, alpha, Profile::OneMinusCos, v).unwrap();
            let c = phi_decomposition_check(&p, &make_grid(6).unwrap()).unwrap();
            prop_assert_eq!(c.off_block, 0.0);
            prop_assert_eq!(c.block_mismatch, 0.0);
        }
    }
}
