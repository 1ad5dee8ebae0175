//! The fiber family `h(x)`: its Fredholm determinant
//! `Δ(x; z) = w1(x) - z - ½ ∫ v1(t)² / (w2(x, t) - z) dt`, the fiber
//! eigenvalues, the essential spectrum and the classification of its bottom.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extrema::{band_extrema, fiber_extrema, golden_min, refine_min, BandExtrema, FiberExtrema};
use crate::grid::{quad, wrap, TorusGrid};
use crate::model::ModelSpec;
use crate::quadrature::{graded_periodic, GradePoint};
use crate::roots::{bisect, expand, Root};
use crate::REPORT_FORMAT;

/// Numerical tolerances shared across the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Target `|Δ|` at an accepted root.
    pub root_tol: f64,
    /// Half-width of the band treated as "zero" when classifying.
    pub sign_tol: f64,
    /// `|v1|` below this counts as vanishing.
    pub v_tol: f64,
    /// Argument tolerance for extremum refinement.
    pub refine_tol: f64,
    /// Width of the borderline window around the counting threshold.
    pub eig_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { root_tol: 1e-12, sign_tol: 1e-9, v_tol: 1e-7, refine_tol: 1e-12, eig_tol: 1e-10, max_iter: 400 }
    }
}

impl Tolerances {
    /// Override one tolerance by name.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Config(format!("tolerance `{key}` must be positive, got {value}")));
        }
        match key {
            "root_tol" => self.root_tol = value,
            "sign_tol" => self.sign_tol = value,
            "v_tol" => self.v_tol = value,
            "refine_tol" => self.refine_tol = value,
            "eig_tol" => self.eig_tol = value,
            "max_iter" => self.max_iter = value as usize,
            other => return Err(Error::Config(format!("unknown tolerance `{other}`"))),
        }
        Ok(())
    }
}

/// Where `E_min` sits relative to the bottom `m` of the three-particle band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// `v1` is nonzero at the minimiser of `w2`: `E_min < m`.
    #[serde(rename = "CaseI_v1_nonzero")]
    CaseI,
    /// `v1` vanishes there and `min_x Δ(x; m) < 0`: `E_min < m`.
    #[serde(rename = "CaseII_negative_min")]
    CaseII,
    /// `v1` vanishes there and `min_x Δ(x; m) > 0`: `E_min = m`.
    #[serde(rename = "CaseIII_nonneg_min")]
    CaseIII,
    /// `min_x Δ(x; m)` is zero within `sign_tol`.
    #[serde(rename = "Boundary_zero_min")]
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberRoots {
    pub below: Option<Root>,
    pub above: Option<Root>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchSample {
    pub x: f64,
    pub below: Option<f64>,
    pub above: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSigma {
    pub samples: Vec<BranchSample>,
    pub intervals: Vec<[f64; 2]>,
    pub clustering: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssentialSpectrumReport {
    pub format: String,
    pub model: String,
    pub grid_n: usize,
    pub sigma_intervals: Vec<[f64; 2]>,
    pub band: [f64; 2],
    pub e_min: f64,
    pub e_max: f64,
    pub classification: Classification,
    pub min_delta_at_m: Option<f64>,
    pub sigma: BranchSigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GWitness {
    pub x: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplicity {
    Exact(u32),
    AtLeast(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaZero {
    pub x: f64,
    pub multiplicity: Multiplicity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroSet {
    /// `Δ(·; E_min)` vanishes at every grid node.
    WholeTorus,
    Points(Vec<DeltaZero>),
}

const MULTIPLICITY_CAP: u32 = 8;

/// Evaluates `Δ(x; z)` for one model on one grid.
#[derive(Debug)]
pub struct DeltaEvaluator {
    model: ModelSpec,
    grid: TorusGrid,
    adaptive_tol: f64,
    tols: Tolerances,
    scan_n: usize,
    fibers: Vec<OnceLock<FiberExtrema>>,
}

impl DeltaEvaluator {
    /// Uses the default distance `2000 / n²` below which the uniform rule is
    /// replaced by graded quadrature. Beyond that distance the peak of the
    /// integrand is wide enough for the midpoint rule to resolve it to
    /// machine precision.
    pub fn new(model: ModelSpec, grid: TorusGrid) -> Self {
        let n = grid.n() as f64;
        let adaptive_tol = 2000.0 / (n * n);
        let scan_n = grid.n().clamp(64, 256);
        let fibers = (0..grid.n()).map(|_| OnceLock::new()).collect();
        Self { model, grid, adaptive_tol, tols: Tolerances::default(), scan_n, fibers }
    }

    pub fn with_adaptive_tol(mut self, adaptive_tol: f64) -> Result<Self> {
        if !(adaptive_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("adaptive_tol must be nonnegative, got {adaptive_tol}")));
        }
        self.adaptive_tol = adaptive_tol;
        Ok(self)
    }

    pub fn with_tolerances(mut self, tols: Tolerances) -> Self {
        self.tols = tols;
        self
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tols
    }

    pub fn adaptive_tol(&self) -> f64 {
        self.adaptive_tol
    }

    /// `min` / `max` of `w2(x, ·)`, memoised at grid nodes.
    pub fn fiber(&self, x: f64) -> FiberExtrema {
        let compute = || fiber_extrema(&self.model, x, self.scan_n, self.tols.refine_tol);
        match self.grid.index_of(x) {
            Some(j) => *self.fibers[j].get_or_init(compute),
            None => compute(),
        }
    }

    fn edge_width(z: f64, edge: f64) -> f64 {
        1e-14 * (1.0 + z.abs() + edge.abs())
    }

    /// `∫ v1(t)² / (w2(x, t) - z) dt` for `z` off the open fiber band.
    pub fn integral(&self, x: f64, z: f64) -> Result<f64> {
        let f = self.fiber(x);
        let lo_edge = Self::edge_width(z, f.min);
        let hi_edge = Self::edge_width(z, f.max);
        let at_lo = (z - f.min).abs() <= lo_edge;
        let at_hi = (z - f.max).abs() <= hi_edge;
        if !at_lo && !at_hi && z > f.min && z < f.max {
            return Err(Error::Domain(format!("z = {z} lies inside the fiber band [{}, {}] at x = {x}", f.min, f.max)));
        }
        if at_lo && self.model.v1(f.argmin).abs() > self.tols.v_tol {
            return Err(Error::Divergence(format!(
                "z = {z} is the fiber minimum at x = {x} but v1({}) = {} does not vanish",
                f.argmin,
                self.model.v1(f.argmin)
            )));
        }
        if at_hi && self.model.v1(f.argmax).abs() > self.tols.v_tol {
            return Err(Error::Divergence(format!(
                "z = {z} is the fiber maximum at x = {x} but v1({}) = {} does not vanish",
                f.argmax,
                self.model.v1(f.argmax)
            )));
        }

        let mut points = Vec::new();
        let mut push = |center: f64, dist: f64, at_edge: bool| {
            if at_edge {
                points.push(GradePoint { center, inner: 1e-5, coarse_core: true });
            } else if dist < self.adaptive_tol {
                points.push(GradePoint { center, inner: (0.05 * dist.sqrt()).max(1e-9), coarse_core: false });
            }
        };
        if z <= f.min + lo_edge {
            push(f.argmin, f.min - z, at_lo);
        }
        if z >= f.max - hi_edge {
            push(f.argmax, z - f.max, at_hi);
        }

        let model = &self.model;
        let integrand = |t: f64| {
            let v = model.v1(t);
            if v == 0.0 {
                return 0.0;
            }
            let den = model.w2(x, t) - z;
            // Only reachable within rounding of an edge where v1 vanishes.
            if (z <= f.min + lo_edge && den <= 0.0) || (z >= f.max - hi_edge && den >= 0.0) {
                return 0.0;
            }
            v * v / den
        };
        if points.is_empty() {
            quad(integrand, &self.grid)
        } else {
            graded_periodic(integrand, &points)
        }
    }

    /// `Δ(x; z)`.
    pub fn delta(&self, x: f64, z: f64) -> Result<f64> {
        Ok(self.model.w1(x) - z - 0.5 * self.integral(x, z)?)
    }

    /// `Δ(x_j; z)` with the plain midpoint rule on this grid and no domain
    /// checks. This is the determinant that makes the discrete
    /// Birman–Schwinger operator an exact Schur complement of the discrete
    /// Hamiltonian.
    pub fn delta_on_grid(&self, j: usize, z: f64) -> f64 {
        let x = self.grid.node(j);
        let mut acc = 0.0;
        for &t in self.grid.nodes() {
            let v = self.model.v1(t);
            acc += v * v / (self.model.w2(x, t) - z);
        }
        self.model.w1(x) - z - 0.5 * acc * self.grid.weight()
    }

    /// Eigenvalues of `h(x)` below and above its band.
    pub fn h_disc_spectrum(&self, x: f64) -> Result<FiberRoots> {
        let f = self.fiber(x);
        let below = self.root_below(x, &f)?;
        let above = self.root_above(x, &f)?;
        Ok(FiberRoots { below, above })
    }

    fn root_below(&self, x: f64, f: &FiberExtrema) -> Result<Option<Root>> {
        let d = |z: f64| self.delta(x, z);
        let (mut lo, hi) = if self.model.v1(f.argmin).abs() <= self.tols.v_tol {
            if d(f.min)? < 0.0 {
                (None, f.min)
            } else {
                return Ok(None);
            }
        } else {
            let mut prev = None;
            let mut found = None;
            for j in 8..=40 {
                let z = f.min - 2f64.powi(-j);
                let v = d(z)?;
                if v < 0.0 {
                    found = Some((prev, z));
                    break;
                }
                prev = Some(z);
            }
            match found {
                Some(pair) => pair,
                None => return Ok(None),
            }
        };
        if lo.is_none() {
            lo = Some(expand(d, hi, -1.0, |v| v > 0.0, 1100)?);
        }
        bisect(d, lo.unwrap(), hi, self.tols.root_tol, self.tols.max_iter).map(Some)
    }

    fn root_above(&self, x: f64, f: &FiberExtrema) -> Result<Option<Root>> {
        let d = |z: f64| self.delta(x, z);
        let (lo, mut hi) = if self.model.v1(f.argmax).abs() <= self.tols.v_tol {
            if d(f.max)? > 0.0 {
                (f.max, None)
            } else {
                return Ok(None);
            }
        } else {
            let mut prev = None;
            let mut found = None;
            for j in 8..=40 {
                let z = f.max + 2f64.powi(-j);
                let v = d(z)?;
                if v > 0.0 {
                    found = Some((z, prev));
                    break;
                }
                prev = Some(z);
            }
            match found {
                Some(pair) => pair,
                None => return Ok(None),
            }
        };
        if hi.is_none() {
            hi = Some(expand(d, lo, 1.0, |v| v < 0.0, 1100)?);
        }
        bisect(d, lo, hi.unwrap(), self.tols.root_tol, self.tols.max_iter).map(Some)
    }

    fn band(&self) -> Result<BandExtrema> {
        band_extrema(&self.model, self.grid.n(), self.tols.refine_tol)
    }

    /// `min_x Δ(x; m)` over the grid plus the minimiser of `w2`, refined by
    /// golden section around the best node.
    fn min_delta_at(&self, m: f64, extra: &[f64]) -> Result<(f64, f64)> {
        let mut best = (f64::INFINITY, 0.0);
        for &x in self.grid.nodes().iter().chain(extra) {
            let v = self.delta(x, m)?;
            if v < best.0 {
                best = (v, x);
            }
        }
        let h = self.grid.weight();
        let mut failure = None;
        let (x, v) = golden_min(
            |x| match self.delta(x, m) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::INFINITY
                }
            },
            best.1 - h,
            best.1 + h,
            1e-9,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(if v < best.0 { (v, wrap(x)) } else { best })
    }

    /// Essential spectrum `σ ∪ [m, M]` and the position of its bottom.
    pub fn essential_spectrum(&self) -> Result<EssentialSpectrumReport> {
        let band = self.band()?;
        let n = self.grid.n();
        let mut samples = Vec::with_capacity(n);
        for &x in self.grid.nodes() {
            let r = self.h_disc_spectrum(x)?;
            samples.push(BranchSample { x, below: r.below.map(|r| r.z), above: r.above.map(|r| r.z) });
        }

        let mut intervals = runs(&samples, |s| s.below);
        intervals.extend(runs(&samples, |s| s.above));

        let below_at = |x: f64| -> f64 {
            match self.h_disc_spectrum(x) {
                Ok(FiberRoots { below: Some(r), .. }) => r.z,
                _ => f64::INFINITY,
            }
        };
        let above_at = |x: f64| -> f64 {
            match self.h_disc_spectrum(x) {
                Ok(FiberRoots { above: Some(r), .. }) => -r.z,
                _ => f64::INFINITY,
            }
        };
        let h = self.grid.weight();
        let mut sigma_inf = f64::INFINITY;
        if let Some((j, z)) = extreme(&samples, |s| s.below) {
            let (_, v) = golden_min(below_at, samples[j].x - h, samples[j].x + h, 1e-8);
            sigma_inf = z.min(v);
            for iv in intervals.iter_mut() {
                if iv[0] == z {
                    iv[0] = sigma_inf;
                }
            }
        }
        let mut sigma_sup = f64::NEG_INFINITY;
        if let Some((j, z)) = extreme(&samples, |s| s.above.map(|v| -v)) {
            let (_, v) = golden_min(above_at, samples[j].x - h, samples[j].x + h, 1e-8);
            sigma_sup = (-z).max(-v);
            for iv in intervals.iter_mut() {
                if iv[1] == -z {
                    iv[1] = sigma_sup;
                }
            }
        }
        let intervals = merge(intervals);

        let m = band.m;
        let v1_nonzero = band.argmin.iter().any(|&(_, y)| self.model.v1(y).abs() > self.tols.v_tol);
        let (classification, min_delta_at_m) = if v1_nonzero {
            (Classification::CaseI, None)
        } else {
            let xs: Vec<f64> = band.argmin.iter().map(|p| p.0).collect();
            let (v, _) = self.min_delta_at(m, &xs)?;
            let c = if v < -self.tols.sign_tol {
                Classification::CaseII
            } else if v > self.tols.sign_tol {
                Classification::CaseIII
            } else {
                Classification::Boundary
            };
            (c, Some(v))
        };

        Ok(EssentialSpectrumReport {
            format: REPORT_FORMAT.to_string(),
            model: self.model.label().to_string(),
            grid_n: n,
            sigma_intervals: intervals.clone(),
            band: [m, band.big_m],
            e_min: sigma_inf.min(m),
            e_max: sigma_sup.max(band.big_m),
            classification,
            min_delta_at_m,
            sigma: BranchSigma {
                samples,
                intervals,
                clustering: "intervals are runs of cyclically adjacent grid nodes carrying a root; \
                             overlapping runs merged; extreme endpoints refined by golden section in x"
                    .to_string(),
            },
        })
    }

    /// Grid nodes with `Δ(x; m) < 0`.
    pub fn set_g(&self) -> Result<Vec<GWitness>> {
        let band = self.band()?;
        if let Some(&(_, y)) = band.argmin.iter().find(|&&(_, y)| self.model.v1(y).abs() > self.tols.v_tol) {
            return Err(Error::Domain(format!("v1 does not vanish at the minimiser y = {y} of w2")));
        }
        let mut out = Vec::new();
        for &x in self.grid.nodes() {
            let delta = self.delta(x, band.m)?;
            if delta < 0.0 {
                out.push(GWitness { x, delta });
            }
        }
        Ok(out)
    }

    /// Perturbation determinant of `h(x)` relative to `h0(x) = diag(0, w2(x, ·))`,
    /// with `v1` rescaled to unit norm. Computed as `det(I + A)` where
    /// `A_ij = ((h - h0)(h0 - z)^{-1} ψ_i, ψ_j)` and
    /// `ψ_{1,2} = (1, ±v̂1) / √2` span the range of the perturbation.
    pub fn perturbation_determinant(&self, x: f64, z: f64) -> Result<f64> {
        if z == 0.0 {
            return Err(Error::Domain("the perturbation determinant has a pole at z = 0".into()));
        }
        let f = self.fiber(x);
        if z >= f.min && z <= f.max {
            return Err(Error::Domain(format!("z = {z} lies in the fiber band [{}, {}]", f.min, f.max)));
        }
        let norm = quad(|t| self.model.v1(t).powi(2), &self.grid)?.sqrt();
        if norm == 0.0 {
            return Err(Error::Domain("v1 vanishes identically".into()));
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let vhat = |t: f64| self.model.v1(t) / norm;
        let w1 = self.model.w1(x);
        let signs = [1.0, -1.0];
        let mut a = [[0.0; 2]; 2];
        for (i, &si) in signs.iter().enumerate() {
            // ψ_i = s · (1, si · v̂)
            let r0 = -s / z;
            let head = w1 * r0 + s * quad(|t| vhat(t) * si * s * vhat(t) / (self.model.w2(x, t) - z), &self.grid)?;
            for (j, &sj) in signs.iter().enumerate() {
                let tail = quad(|t| (s * vhat(t) * r0) * (sj * s * vhat(t)), &self.grid)?;
                a[i][j] = head * s + tail;
            }
        }
        Ok((1.0 + a[0][0]) * (1.0 + a[1][1]) - a[0][1] * a[1][0])
    }

    /// Zeros of `Δ(·; E_min)` with their multiplicities.
    pub fn delta_zeros_at_emin(&self, report: &EssentialSpectrumReport) -> Result<ZeroSet> {
        if !matches!(report.classification, Classification::CaseI | Classification::CaseII) {
            return Err(Error::Domain(format!(
                "zeros at E_min need E_min below the band, classification is {:?}",
                report.classification
            )));
        }
        let e = report.e_min;
        let zero_tol = self.tols.sign_tol;
        let nodes = self.grid.nodes();
        let n = nodes.len();
        let g: Vec<f64> = nodes.iter().map(|&x| self.delta(x, e)).collect::<Result<_>>()?;
        if g.iter().all(|v| v.abs() <= zero_tol) {
            return Ok(ZeroSet::WholeTorus);
        }
        let delta = |x: f64| self.delta(x, e).unwrap_or(f64::NAN);
        let mut zeros: Vec<DeltaZero> = Vec::new();
        let mut push = |z: DeltaZero| {
            if !zeros.iter().any(|q| wrap(q.x - z.x).abs() < 1e-6) {
                zeros.push(z);
            }
        };
        let h = self.grid.weight();
        for j in 0..n {
            let k = (j + 1) % n;
            let (a, b) = (nodes[j], if k == 0 { nodes[0] + 2.0 * PI } else { nodes[k] });
            if g[j].abs() > zero_tol && g[k].abs() > zero_tol && g[j].signum() != g[k].signum() {
                let r = bisect(|x| Ok(delta(x)), a, b, self.tols.root_tol, self.tols.max_iter)?;
                push(DeltaZero { x: wrap(r.z), multiplicity: Multiplicity::Exact(1) });
            }
            let p = (j + n - 1) % n;
            if g[j] <= g[p] && g[j] <= g[k] && g[j] >= -zero_tol {
                let (x, v) = refine_min(delta, nodes[j] - h, nodes[j] + h, self.tols.refine_tol);
                if v.abs() <= zero_tol {
                    push(DeltaZero { x: wrap(x), multiplicity: self.touching_order(&delta, x) });
                }
            }
        }
        Ok(ZeroSet::Points(zeros))
    }

    fn touching_order(&self, delta: &impl Fn(f64) -> f64, x: f64) -> Multiplicity {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for k in 3..=8 {
            let d = 2f64.powi(-k);
            let v = 0.5 * (delta(x + d).abs() + delta(x - d).abs());
            if v > 0.0 && v.is_finite() {
                xs.push(d.ln());
                ys.push(v.ln());
            }
        }
        if xs.len() < 2 {
            return Multiplicity::AtLeast(MULTIPLICITY_CAP);
        }
        let c = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / c;
        let my = ys.iter().sum::<f64>() / c;
        let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
        let slope = sxy / sxx;
        let even = (2.0 * (slope / 2.0).round()).max(2.0);
        if even >= f64::from(MULTIPLICITY_CAP) {
            Multiplicity::AtLeast(MULTIPLICITY_CAP)
        } else {
            Multiplicity::Exact(even as u32)
        }
    }
}

/// Interval cover of the values carried by cyclically adjacent nodes.
fn runs(samples: &[BranchSample], pick: impl Fn(&BranchSample) -> Option<f64>) -> Vec<[f64; 2]> {
    let n = samples.len();
    let present: Vec<Option<f64>> = samples.iter().map(&pick).collect();
    if present.iter().all(Option::is_some) {
        let vals = present.iter().flatten();
        let lo = vals.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.copied().fold(f64::NEG_INFINITY, f64::max);
        return vec![[lo, hi]];
    }
    let Some(start) = present.iter().position(Option::is_none) else { return Vec::new() };
    let mut out = Vec::new();
    let mut cur: Option<[f64; 2]> = None;
    for i in 1..=n {
        match present[(start + i) % n] {
            Some(v) => {
                let c = cur.get_or_insert([v, v]);
                c[0] = c[0].min(v);
                c[1] = c[1].max(v);
            }
            None => {
                if let Some(c) = cur.take() {
                    out.push(c);
                }
            }
        }
    }
    out
}

fn extreme(samples: &[BranchSample], pick: impl Fn(&BranchSample) -> Option<f64>) -> Option<(usize, f64)> {
    samples
        .iter()
        .enumerate()
        .filter_map(|(j, s)| pick(s).map(|v| (j, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
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
