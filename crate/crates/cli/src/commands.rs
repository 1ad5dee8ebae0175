use fockspec::birman_schwinger::{BirmanSchwinger, BsCount};
use fockspec::exact::{attach_oracle, band_edges, exact_table, ExactEigenvalue, ExactParams};
use fockspec::friedrichs::{Classification, EssentialSpectrumReport, GWitness, ZeroSet};
use fockspec::linalg::Cluster;
use fockspec::model::Family;
use fockspec::oracle::{assemble_h, clusters};
use fockspec::spin_boson::{a2_spectrum_report_with, SpinBosonParams};
use fockspec::threshold::{delta_at_origin, growth_scan, lambda_limit, mu_critical, ThresholdCase, ThresholdReport};
use fockspec::{Error, Result, REPORT_FORMAT};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::{num, opt, Rendered, Table};

/// Offsets below `E_min` used by `count` when no `--z` is given.
pub const DEFAULT_Z_OFFSETS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

pub fn ess(cfg: &RunConfig) -> Result<Rendered> {
    let r = cfg.evaluator()?.essential_spectrum()?;
    let mut t = Table::new(&["kind", "lo", "hi"]);
    t.meta("model", r.model.clone())
        .meta("grid_n", r.grid_n.to_string())
        .meta("classification", classification_name(r.classification))
        .meta("min_delta_at_m", opt(r.min_delta_at_m));
    for iv in &r.sigma_intervals {
        t.row(vec!["sigma".into(), num(iv[0]), num(iv[1])]);
    }
    t.row(vec!["band".into(), num(r.band[0]), num(r.band[1])]);
    t.row(vec!["essential".into(), num(r.e_min), num(r.e_max)]);
    Rendered::new(&r, t)
}

fn classification_name(c: Classification) -> String {
    serde_json::to_value(c).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub format: String,
    pub model: String,
    pub grid_n: usize,
    pub classification: Classification,
    pub e_min: f64,
    pub band: [f64; 2],
    pub min_delta_at_m: Option<f64>,
    /// Grid nodes with `Δ(x; m) < 0`; absent when `v1` is nonzero at the
    /// band minimiser.
    pub set_g: Option<Vec<GWitness>>,
    /// Zeros of `Δ(·; E_min)`; present when `E_min` lies below the band.
    pub zeros_at_e_min: Option<ZeroSet>,
}

pub fn classify(cfg: &RunConfig) -> Result<Rendered> {
    let eval = cfg.evaluator()?;
    let r = eval.essential_spectrum()?;
    let set_g = match r.classification {
        Classification::CaseI => None,
        _ => Some(eval.set_g()?),
    };
    let zeros_at_e_min = match r.classification {
        Classification::CaseI | Classification::CaseII => Some(eval.delta_zeros_at_emin(&r)?),
        _ => None,
    };
    let report = ClassifyReport {
        format: REPORT_FORMAT.into(),
        model: r.model.clone(),
        grid_n: r.grid_n,
        classification: r.classification,
        e_min: r.e_min,
        band: r.band,
        min_delta_at_m: r.min_delta_at_m,
        set_g,
        zeros_at_e_min,
    };
    let mut t = Table::new(&["key", "value"]);
    t.meta("model", report.model.clone()).meta("grid_n", report.grid_n.to_string());
    t.row(vec!["classification".into(), classification_name(report.classification)]);
    t.row(vec!["e_min".into(), num(report.e_min)]);
    t.row(vec!["m".into(), num(report.band[0])]);
    t.row(vec!["M".into(), num(report.band[1])]);
    t.row(vec!["min_delta_at_m".into(), opt(report.min_delta_at_m)]);
    if let Some(g) = &report.set_g {
        t.row(vec!["set_g_nodes".into(), g.len().to_string()]);
    }
    match &report.zeros_at_e_min {
        Some(ZeroSet::WholeTorus) => t.row(vec!["zeros_at_e_min".into(), "whole_torus".into()]),
        Some(ZeroSet::Points(p)) => {
            let xs: Vec<String> = p.iter().map(|z| num(z.x)).collect();
            t.row(vec!["zeros_at_e_min".into(), xs.join(" ")]);
        }
        None => {}
    }
    Rendered::new(&report, t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub format: String,
    pub model: String,
    pub grid_n: usize,
    pub e_min: f64,
    pub counts: Vec<BsCount>,
}

pub fn count(cfg: &RunConfig) -> Result<Rendered> {
    let eval = cfg.evaluator()?;
    let ess = eval.essential_spectrum()?;
    let zs: Vec<f64> = if cfg.z_values.is_empty() {
        DEFAULT_Z_OFFSETS.iter().map(|d| ess.e_min - d).collect()
    } else {
        cfg.z_values.clone()
    };
    let bs = BirmanSchwinger::with_e_min(&eval, ess.e_min);
    let counts = zs.iter().map(|&z| bs.count(z)).collect::<Result<Vec<_>>>()?;
    let report = CountReport { format: REPORT_FORMAT.into(), model: ess.model, grid_n: cfg.grid_n, e_min: ess.e_min, counts };
    let mut t = Table::new(&["z", "count", "borderline", "top_eigenvalue"]);
    t.meta("model", report.model.clone()).meta("grid_n", report.grid_n.to_string()).meta("e_min", num(report.e_min));
    for c in &report.counts {
        t.row(vec![num(c.z), c.count.to_string(), c.borderline_flags.len().to_string(), opt(c.top_eigenvalues.first().copied())]);
    }
    Rendered::new(&report, t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactReport {
    pub format: String,
    pub a: f64,
    pub b: f64,
    pub w0: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub kmax: u32,
    pub oracle_n: Option<usize>,
    pub eigenvalues: Vec<ExactEigenvalue>,
}

pub fn exact(cfg: &RunConfig, kmax: u32, oracle_n: Option<usize>) -> Result<Rendered> {
    let Family::Exact { a, b, w0 } = cfg.family else {
        return Err(Error::Config(format!("`exact` needs the exact model, got `{}`", cfg.family.tag())));
    };
    let p = ExactParams::new(a, b, w0)?;
    let (e_min, e_max) = band_edges(&p)?;
    let mut rows = exact_table(&p, kmax)?;
    if let Some(n) = oracle_n {
        let h = assemble_h(&p.model()?, &fockspec::grid::make_grid(n)?)?;
        attach_oracle(&mut rows, &clusters(&h.eigenvalues()?));
    }
    let report = ExactReport { format: REPORT_FORMAT.into(), a, b, w0, e_min, e_max, kmax, oracle_n, eigenvalues: rows };
    let mut t = Table::new(&["branch", "k", "xi", "multiplicity", "equation_residual", "residual_vs_oracle"]);
    t.meta("a", num(a)).meta("b", num(b)).meta("w0", num(w0)).meta("e_min", num(e_min)).meta("e_max", num(e_max));
    for e in &report.eigenvalues {
        t.row(vec![
            (e.branch as u8).to_string(),
            e.k.to_string(),
            num(e.xi),
            e.multiplicity.to_string(),
            num(e.equation_residual),
            opt(e.residual_vs_oracle),
        ]);
    }
    Rendered::new(&report, t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdsReport {
    pub format: String,
    pub case: ThresholdCase,
    pub l: Option<f64>,
    pub mu: f64,
    pub mu_critical: f64,
    pub delta_origin: f64,
    pub lambda_limit: Option<f64>,
    pub growth: ThresholdReport,
}

pub fn thresholds(cfg: &RunConfig, case: &str, l: Option<f64>, grids: &[usize]) -> Result<Rendered> {
    let case = ThresholdCase::parse(case)?;
    let l = match case {
        ThresholdCase::I => Some(l.ok_or_else(|| Error::Config("--case 1 needs --l".into()))?),
        ThresholdCase::II => None,
    };
    let mu0 = mu_critical(case, l)?;
    let mu = match cfg.params.get("mu") {
        Some(s) => fockspec::model::parse_number(s)?,
        None => mu0,
    };
    let family = match case {
        ThresholdCase::I => Family::CaseI { l: l.unwrap_or_default(), mu },
        ThresholdCase::II => Family::CaseII { mu },
    };
    let model = fockspec::model::builtin(&family)?;
    let growth = growth_scan(&model, grids, cfg.count_margin)?;
    let report = ThresholdsReport {
        format: REPORT_FORMAT.into(),
        case,
        l,
        mu,
        mu_critical: mu0,
        delta_origin: delta_at_origin(case, l, mu)?,
        lambda_limit: l.map(lambda_limit).transpose()?,
        growth,
    };
    let mut t = Table::new(&["n", "dim", "count", "min_eig"]);
    t.meta("case", format!("{:?}", report.case))
        .meta("l", opt(report.l))
        .meta("mu", num(report.mu))
        .meta("mu_critical", num(report.mu_critical))
        .meta("delta_origin", num(report.delta_origin))
        .meta("lambda_limit", opt(report.lambda_limit))
        .meta("classification", classification_name(report.growth.classification))
        .meta("count_margin", num(report.growth.count_margin));
    for r in &report.growth.rows {
        t.row(vec![r.n.to_string(), r.dim.to_string(), r.count.to_string(), num(r.min_eig)]);
    }
    Rendered::new(&report, t)
}

pub fn app(cfg: &RunConfig) -> Result<Rendered> {
    let Family::SpinBoson { sigma, epsilon, alpha, w, v } = cfg.family else {
        return Err(Error::Config(format!("`app` needs the spinboson model, got `{}`", cfg.family.tag())));
    };
    if sigma != 1 || cfg.params.contains_key("sigma") {
        return Err(Error::Config("`app` covers both spin sectors; drop the sigma parameter".into()));
    }
    let p = SpinBosonParams::new(epsilon, alpha, w, v)?;
    let r = a2_spectrum_report_with(&p, &cfg.grid()?, cfg.tols)?;
    let mut t = Table::new(&["sector", "z", "count"]);
    t.meta("alpha", num(r.alpha))
        .meta("alpha0", opt(r.alpha0))
        .meta("e_min_plus", num(r.e_min_plus))
        .meta("e_min_minus", num(r.e_min_minus))
        .meta("e_min", num(r.e_min));
    let ivs: Vec<String> = r.ess_intervals.iter().map(|iv| format!("[{} {}]", num(iv[0]), num(iv[1]))).collect();
    t.meta("ess_intervals", ivs.join(" "));
    for f in &r.flags {
        t.meta("flag", f.clone());
    }
    for c in &r.counts_plus {
        t.row(vec!["+".into(), num(c.z), c.count.to_string()]);
    }
    for c in &r.counts_minus {
        t.row(vec!["-".into(), num(c.z), c.count.to_string()]);
    }
    Rendered::new(&r, t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub format: String,
    pub model: String,
    pub grid_n: usize,
    pub dim: usize,
    /// Eigenvalues strictly below this value are reported.
    pub cutoff: f64,
    pub eigenvalues: Vec<f64>,
    pub clusters: Vec<Cluster>,
}

pub fn oracle(cfg: &RunConfig) -> Result<Rendered> {
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let h = assemble_h(&model, &grid)?;
    let cutoff = match cfg.z_values.first() {
        Some(&z) => z,
        None => {
            let ess: EssentialSpectrumReport = cfg.evaluator()?.essential_spectrum()?;
            ess.e_min
        }
    };
    let eigenvalues: Vec<f64> = h.eigenvalues()?.into_iter().take_while(|&e| e < cutoff).collect();
    let report = OracleReport {
        format: REPORT_FORMAT.into(),
        model: model.label().to_string(),
        grid_n: grid.n(),
        dim: h.dim(),
        cutoff,
        clusters: clusters(&eigenvalues),
        eigenvalues,
    };
    let mut t = Table::new(&["value", "multiplicity", "spread"]);
    t.meta("model", report.model.clone())
        .meta("grid_n", report.grid_n.to_string())
        .meta("dim", report.dim.to_string())
        .meta("cutoff", num(report.cutoff));
    for c in &report.clusters {
        t.row(vec![num(c.value), c.multiplicity.to_string(), num(c.spread)]);
    }
    Rendered::new(&report, t)
}
