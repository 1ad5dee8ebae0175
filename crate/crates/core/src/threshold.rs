//! The threshold regime `v1(0) = 0`, `Δ(0; m) = 0` at `m = 0`: critical
//! couplings, the small-`(x, z)` behaviour of `Δ`, the comparison operator
//! `S(z)` and grid-growth signals for the negative discrete spectrum.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extrema::band_extrema;
use crate::friedrichs::{Classification, DeltaEvaluator};
use crate::grid::make_grid;
use crate::model::{builtin, Family, ModelSpec};
use crate::oracle::{assemble_h, FockGridBasis, MAX_DIM};
use crate::REPORT_FORMAT;

/// Grid used for the quadrature checks in this module.
const CHECK_GRID: usize = 256;
/// Below this, `x² + √|z|` is treated as zero in the normalised deviation.
const DENOM_FLOOR: f64 = 1e-12;
/// Grid for the classification reported alongside a growth scan.
const CLASSIFY_GRID: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdCase {
    I,
    II,
}

impl ThresholdCase {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "I" | "i" => Ok(Self::I),
            "2" | "II" | "ii" => Ok(Self::II),
            other => Err(Error::Config(format!("unknown threshold case `{other}` (expected 1 or 2)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseIParams {
    pub l: f64,
    pub mu: f64,
    /// Localisation radius entering `R(z) = -ln(√|z| / δ)`.
    pub delta_cut: f64,
}

impl CaseIParams {
    pub fn new(l: f64, mu: f64) -> Result<Self> {
        Self::with_cut(l, mu, 0.1)
    }

    pub fn with_cut(l: f64, mu: f64, delta_cut: f64) -> Result<Self> {
        for (name, v) in [("l", l), ("mu", mu), ("delta_cut", delta_cut)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if (1.0 + 2.0 * l - l * l).abs() < 1e-12 {
            return Err(Error::InvalidArgument(format!("1 + 2l - l² vanishes at l = {l}")));
        }
        Ok(Self { l, mu, delta_cut })
    }

    /// Critical coupling `(1 + l) / π`.
    pub fn critical(l: f64) -> Result<Self> {
        Self::new(l, (1.0 + l) / PI)
    }

    pub fn model(&self) -> Result<ModelSpec> {
        builtin(&Family::CaseI { l: self.l, mu: self.mu })
    }

    /// Coefficient `c` of the square-root term in `Δ(x; z)` near the origin.
    pub fn sqrt_coefficient(&self) -> f64 {
        let l = self.l;
        self.mu * PI * (1.0 + 2.0 * l - l * l) / ((1.0 + l).powi(2) * (1.0 + 2.0 * l).sqrt())
    }
}

/// `Δ(0; 0)` by quadrature for a threshold model.
pub fn delta_at_origin(case: ThresholdCase, l: Option<f64>, mu: f64) -> Result<f64> {
    let family = match case {
        ThresholdCase::I => {
            let l = l.ok_or_else(|| Error::InvalidArgument("case I needs l".into()))?;
            Family::CaseI { l, mu }
        }
        ThresholdCase::II => Family::CaseII { mu },
    };
    DeltaEvaluator::new(builtin(&family)?, make_grid(CHECK_GRID)?).delta(0.0, 0.0)
}

/// Coupling at which `Δ(0; 0) = 0`: `(1 + l) / π` for case I, `1 / π` for
/// case II. The closed form is confirmed by quadrature.
pub fn mu_critical(case: ThresholdCase, l: Option<f64>) -> Result<f64> {
    let mu = match case {
        ThresholdCase::I => {
            let l = l.ok_or_else(|| Error::InvalidArgument("case I needs l".into()))?;
            CaseIParams::critical(l)?.mu
        }
        ThresholdCase::II => 1.0 / PI,
    };
    let d = delta_at_origin(case, l, mu)?;
    if d.abs() > 1e-8 {
        return Err(Error::EstimationFailed(format!("Δ(0; 0) = {d} at the critical coupling {mu}")));
    }
    Ok(mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSample {
    pub x: f64,
    pub z: f64,
    pub delta: f64,
    pub leading: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCheck {
    pub coefficient: f64,
    pub samples: Vec<AsymptoticSample>,
    pub max_ratio: f64,
    pub median_ratio: f64,
}

/// Compare `Δ(x; z)` against `c √(x² - 2(1+l) z / (1+2l))` and normalise the
/// remainder by `x² + √|z|`.
pub fn delta_asymptotic_check(p: &CaseIParams, samples: &[(f64, f64)]) -> Result<AsymptoticCheck> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    if let Some(&(x, z)) = samples.iter().find(|&&(x, z)| !(x.abs() <= 0.1 && (-0.01..=0.0).contains(&z))) {
        return Err(Error::Domain(format!("sample (x = {x}, z = {z}) is outside |x| ≤ 0.1, -0.01 ≤ z ≤ 0")));
    }
    let eval = DeltaEvaluator::new(p.model()?, make_grid(CHECK_GRID)?);
    let c = p.sqrt_coefficient();
    let l = p.l;
    let mut out = Vec::with_capacity(samples.len());
    for &(x, z) in samples {
        let delta = eval.delta(x, z)?;
        let leading = c * (x * x - 2.0 * (1.0 + l) * z / (1.0 + 2.0 * l)).sqrt();
        let ratio = (delta - leading).abs() / (x * x + z.abs().sqrt()).max(DENOM_FLOOR);
        out.push(AsymptoticSample { x, z, delta, leading, ratio });
    }
    let mut ratios: Vec<f64> = out.iter().map(|s| s.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let k = ratios.len();
    let median_ratio = if k % 2 == 1 { ratios[k / 2] } else { 0.5 * (ratios[k / 2 - 1] + ratios[k / 2]) };
    Ok(AsymptoticCheck { coefficient: c, samples: out, max_ratio: ratios[k - 1], median_ratio })
}

/// The dyadic ladder `x = 2^{-j}`, `z = -4^{-j}` for `j` in `js`.
pub fn dyadic_ladder(js: std::ops::RangeInclusive<i32>) -> Vec<(f64, f64)> {
    js.map(|j| (2f64.powi(-j), -(4f64.powi(-j)))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsStatus {
    Bounded,
    /// `Δ(0; 0) > 0`, so `Δ(x; 0) / x²` blows up at the origin.
    Divergent,
    /// Some ratio is nonpositive or not finite.
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBounds {
    pub mu: f64,
    pub delta_origin: f64,
    pub ratios: Vec<[f64; 2]>,
    pub c1: f64,
    pub c2: f64,
    pub status: BoundsStatus,
}

/// Estimate `C1 ≤ Δ(x; 0) / x² ≤ C2` over `x_ladder` for the case II model.
pub fn case2_quadratic_bounds(mu: f64, x_ladder: &[f64]) -> Result<QuadraticBounds> {
    if let Some(&x) = x_ladder.iter().find(|&&x| !(x != 0.0 && x.abs() <= 0.2)) {
        return Err(Error::Domain(format!("ladder point {x} is outside 0 < |x| ≤ 0.2")));
    }
    if x_ladder.is_empty() {
        return Err(Error::InvalidArgument("empty ladder".into()));
    }
    let eval = DeltaEvaluator::new(builtin(&Family::CaseII { mu })?, make_grid(CHECK_GRID)?);
    let delta_origin = eval.delta(0.0, 0.0)?;
    let mut ratios = Vec::with_capacity(x_ladder.len());
    for &x in x_ladder {
        ratios.push([x, eval.delta(x, 0.0)? / (x * x)]);
    }
    let c1 = ratios.iter().map(|r| r[1]).fold(f64::INFINITY, f64::min);
    let c2 = ratios.iter().map(|r| r[1]).fold(f64::NEG_INFINITY, f64::max);
    let status = if delta_origin > eval.tolerances().sign_tol {
        BoundsStatus::Divergent
    } else if !(c1 > 0.0 && c2.is_finite()) {
        BoundsStatus::Violation
    } else {
        BoundsStatus::Bounded
    };
    Ok(QuadraticBounds { mu, delta_origin, ratios, c1, c2, status })
}

fn comparison_prefactor(l: f64) -> (f64, f64) {
    let a = (l / (1.0 + l)).acos();
    let p = (1.0 + l).powi(2) * (1.0 + 2.0 * l).sqrt() / ((1.0 + 2.0 * l - l * l) * (1.0 + l) * a.sin());
    (p, a)
}

/// `(sh(a q) + sh((π - a) q)) / sh(π q)`, evaluated without overflow.
fn sh_ratio(a: f64, q: f64) -> f64 {
    let q = q.abs();
    if q == 0.0 {
        return 1.0;
    }
    let b = PI - a;
    let part = |c: f64| ((c - PI) * q).exp() * -(-2.0 * c * q).exp_m1();
    (part(a) + part(b)) / -(-2.0 * PI * q).exp_m1()
}

/// Eigenvalue `λ_k(z)` of the comparison operator `S(z)`.
pub fn lambda_k_s(p: &CaseIParams, k: i64, z: f64) -> Result<f64> {
    if !(z < 0.0) {
        return Err(Error::Domain(format!("S(z) needs z < 0, got {z}")));
    }
    let r = -((z.abs().sqrt()) / p.delta_cut).ln();
    if !(r > 0.0) {
        return Err(Error::Domain(format!("R(z) = {r} ≤ 0 at z = {z}: need |z| < δ² = {}", p.delta_cut.powi(2))));
    }
    let (pre, a) = comparison_prefactor(p.l);
    Ok(pre * sh_ratio(a, 2.0 * k as f64 * PI / r))
}

/// `lim_{z → 0⁻} λ_k(z)`, the same for every `k`.
pub fn lambda_limit(l: f64) -> Result<f64> {
    if !(l.is_finite() && l > 0.0) || (1.0 + 2.0 * l - l * l).abs() < 1e-12 {
        return Err(Error::InvalidArgument(format!("lambda_limit needs l > 0 with 1 + 2l - l² ≠ 0, got {l}")));
    }
    Ok(comparison_prefactor(l).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n: usize,
    pub dim: usize,
    pub count: usize,
    /// Smallest oracle eigenvalue.
    pub min_eig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub format: String,
    pub model: String,
    pub case: Option<ThresholdCase>,
    pub mu_critical: Option<f64>,
    pub classification: Classification,
    /// Bottom `m` of the three-particle band.
    pub band_bottom: f64,
    pub count_margin: f64,
    pub rows: Vec<GrowthRow>,
}

impl ThresholdReport {
    pub fn counts(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.count).collect()
    }
}

/// Count oracle eigenvalues below `m - count_margin` on each grid. Grids run
/// sequentially, smallest memory first.
pub fn growth_scan(model: &ModelSpec, grids: &[usize], count_margin: f64) -> Result<ThresholdReport> {
    if !(count_margin.is_finite() && count_margin >= 0.0) {
        return Err(Error::InvalidArgument(format!("count_margin must be nonnegative, got {count_margin}")));
    }
    if let Some(&n) = grids.iter().find(|&&n| FockGridBasis::dim_for(n) > MAX_DIM) {
        return Err(Error::ResourceGuard(format!(
            "grid n = {n} needs an oracle of dimension {} > {MAX_DIM}",
            FockGridBasis::dim_for(n)
        )));
    }
    let (case, mu_critical) = match model.family() {
        Some(Family::CaseI { l, .. }) => (Some(ThresholdCase::I), Some((1.0 + l) / PI)),
        Some(Family::CaseII { .. }) => (Some(ThresholdCase::II), Some(1.0 / PI)),
        _ => (None, None),
    };
    let classify = DeltaEvaluator::new(model.clone(), make_grid(CLASSIFY_GRID)?);
    let classification = classify.essential_spectrum()?.classification;
    let m = band_extrema(model, CLASSIFY_GRID, classify.tolerances().refine_tol)?.m;

    let mut rows = Vec::with_capacity(grids.len());
    for &n in grids {
        let h = assemble_h(model, &make_grid(n)?)?;
        let eigs = h.eigenvalues()?;
        rows.push(GrowthRow {
            n,
            dim: h.dim(),
            count: eigs.iter().take_while(|&&e| e < m - count_margin).count(),
            min_eig: eigs.first().copied().unwrap_or(f64::NAN),
        });
    }
    Ok(ThresholdReport {
        format: REPORT_FORMAT.to_string(),
        model: model.label().to_string(),
        case,
        mu_critical,
        classification,
        band_bottom: m,
        count_margin,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn critical_couplings() {
        let mu1 = mu_critical(ThresholdCase::I, Some(2.0)).unwrap();
        assert!((mu1 - 3.0 / PI).abs() < 1e-15);
        let mu2 = mu_critical(ThresholdCase::II, None).unwrap();
        assert!((mu2 - 1.0 / PI).abs() < 1e-15);
        assert!(matches!(mu_critical(ThresholdCase::I, None), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn origin_sign_flips_across_critical_coupling() {
        for (case, l, mu0) in [(ThresholdCase::I, Some(2.0), 3.0 / PI), (ThresholdCase::II, None, 1.0 / PI)] {
            assert!(delta_at_origin(case, l, mu0 * 0.99).unwrap() > 0.0);
            assert!(delta_at_origin(case, l, mu0 * 1.01).unwrap() < 0.0);
        }
    }

    #[test]
    fn coefficient_at_l2() {
        let p = CaseIParams::critical(2.0).unwrap();
        assert!((p.sqrt_coefficient() - 1.0 / (3.0 * 5f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn asymptotics_at_origin_vanish() {
        let p = CaseIParams::critical(2.0).unwrap();
        let c = delta_asymptotic_check(&p, &[(0.0, 0.0)]).unwrap();
        assert!(c.samples[0].delta.abs() < 1e-10);
        assert_eq!(c.samples[0].leading, 0.0);
        assert!(delta_asymptotic_check(&p, &[(0.2, 0.0)]).is_err());
        assert!(delta_asymptotic_check(&p, &[(0.0, 0.1)]).is_err());
    }

    #[test]
    fn asymptotic_ratio_stays_bounded() {
        let p = CaseIParams::critical(2.0).unwrap();
        let c = delta_asymptotic_check(&p, &dyadic_ladder(4..=10)).unwrap();
        assert!(c.max_ratio.is_finite());
        assert!(c.max_ratio <= 10.0 * c.median_ratio, "{c:?}");
    }

    #[test]
    fn quadratic_bounds_at_critical_coupling() {
        let ladder: Vec<f64> = (3..=10).map(|j| 2f64.powi(-j)).collect();
        let b = case2_quadratic_bounds(1.0 / PI, &ladder).unwrap();
        assert_eq!(b.status, BoundsStatus::Bounded);
        assert!(b.c1 > 0.0 && b.c2 / b.c1 <= 50.0, "{b:?}");
        let sub = case2_quadratic_bounds(0.9 / PI, &ladder).unwrap();
        assert_eq!(sub.status, BoundsStatus::Divergent);
        assert!(case2_quadratic_bounds(1.0 / PI, &[0.5]).is_err());
    }

    #[test]
    fn comparison_limit_and_zero_mode() {
        assert!((lambda_limit(2.0).unwrap() - 9.0).abs() < 1e-12);
        let p = CaseIParams::critical(2.0).unwrap();
        assert!((lambda_k_s(&p, 0, -1e-4).unwrap() - 9.0).abs() < 1e-12);
        assert!(lambda_k_s(&p, 1, 0.0).is_err());
        assert!(lambda_k_s(&p, 1, -0.02).is_err());
        assert!(lambda_limit(1.0 + 2f64.sqrt()).is_err());
    }

    #[test]
    fn comparison_eigenvalues_approach_limit() {
        let p = CaseIParams::critical(2.0).unwrap();
        let mut prev = f64::INFINITY;
        for j in 4..=60 {
            let v = lambda_k_s(&p, 3, -(4f64.powi(-j))).unwrap();
            let gap = (v - 9.0).abs();
            assert!(gap <= prev);
            prev = gap;
        }
        // R(z) grows only like -ln|z| / 2, so convergence is logarithmic
        let far = lambda_k_s(&p, 3, -1e-300).unwrap();
        assert!((far - 9.0).abs() < 0.05, "{far}");
    }

    #[test]
    fn decoupled_growth_is_zero() {
        let m = ModelSpec::new(
            "decoupled",
            0.5,
            Arc::new(|x: f64| 2.0 - x.cos()),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Arc::new(|x: f64, y: f64| 2.0 - x.cos() - y.cos()),
        )
        .unwrap();
        let r = growth_scan(&m, &[8, 12], 1e-6).unwrap();
        assert_eq!(r.counts(), vec![0, 0]);
        assert_eq!(r.case, None);
        assert!(matches!(growth_scan(&m, &[200], 1e-6), Err(Error::ResourceGuard(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn s_eigenvalues_symmetric_in_k(k in 0i64..50, j in 4i32..30) {
            let p = CaseIParams::critical(2.0).unwrap();
            let z = -(4f64.powi(-j));
            prop_assert_eq!(lambda_k_s(&p, k, z).unwrap(), lambda_k_s(&p, -k, z).unwrap());
        }

        #[test]
        fn limit_positive_below_degenerate_l(l in 0.01f64..2.4) {
            let v = lambda_limit(l).unwrap();
            prop_assert!(v.is_finite() && v > 0.0);
        }

        #[test]
        fn origin_sign_tracks_coupling(f in 0.9f64..1.1) {
            prop_assume!((f - 1.0).abs() > 1e-3);
            for (case, l, mu0) in [(ThresholdCase::I, Some(2.0), 3.0 / PI), (ThresholdCase::II, None, 1.0 / PI)] {
                let d = delta_at_origin(case, l, mu0 * f).unwrap();
                prop_assert_eq!(d > 0.0, f < 1.0);
            }
        }
    }
}
