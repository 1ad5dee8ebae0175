//! Model parameter functions and the built-in families.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TorusGrid;

pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Vacuum level used by the threshold families, whose construction leaves
/// `w0` and `v0` open. Any value works because both threshold phenomena live
/// entirely in the one/two-particle blocks when `v0 = 0`.
pub const THRESHOLD_VACUUM_LEVEL: f64 = 1.0;

/// The five parameter functions of the block operator.
#[derive(Clone)]
pub struct ModelSpec {
    label: String,
    w0: f64,
    w1: Fn1,
    v0: Fn1,
    v1: Fn1,
    w2: Fn2,
    family: Option<Family>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("label", &self.label)
            .field("w0", &self.w0)
            .field("family", &self.family)
            .finish_non_exhaustive()
    }
}

impl ModelSpec {
    pub fn new(label: impl Into<String>, w0: f64, w1: Fn1, v0: Fn1, v1: Fn1, w2: Fn2) -> Result<Self> {
        if !w0.is_finite() {
            return Err(Error::InvalidArgument(format!("w0 must be finite, got {w0}")));
        }
        Ok(Self { label: label.into(), w0, w1, v0, v1, w2, family: None })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn family(&self) -> Option<&Family> {
        self.family.as_ref()
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn w1(&self, x: f64) -> f64 {
        (self.w1)(x)
    }

    pub fn v0(&self, x: f64) -> f64 {
        (self.v0)(x)
    }

    pub fn v1(&self, x: f64) -> f64 {
        (self.v1)(x)
    }

    pub fn w2(&self, x: f64, y: f64) -> f64 {
        (self.w2)(x, y)
    }

    /// Same model with `v1` multiplied by `factor`.
    pub fn with_scaled_v1(&self, factor: f64) -> Self {
        let v1 = Arc::clone(&self.v1);
        Self {
            label: format!("{} (v1 x {factor})", self.label),
            v1: Arc::new(move |t| factor * v1(t)),
            family: None,
            ..self.clone()
        }
    }

    /// Check that every parameter function is finite on the grid and that
    /// `w2` is symmetric there.
    pub fn validate_on(&self, grid: &TorusGrid) -> Result<()> {
        for (node, &x) in grid.nodes().iter().enumerate() {
            for value in [self.w1(x), self.v0(x), self.v1(x)] {
                if !value.is_finite() {
                    return Err(Error::NonFinite { node, x, value });
                }
            }
            for &y in grid.nodes() {
                let a = self.w2(x, y);
                if !a.is_finite() {
                    return Err(Error::NonFinite { node, x, value: a });
                }
                let b = self.w2(y, x);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                    return Err(Error::InvalidArgument(format!(
                        "w2 is not symmetric: w2({x}, {y}) = {a} but w2({y}, {x}) = {b}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One-variable profiles used by the spin-boson family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    OneMinusCos,
    Sin,
    OnePlusSin,
    One,
}

impl Profile {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Profile::OneMinusCos => 1.0 - t.cos(),
            Profile::Sin => t.sin(),
            Profile::OnePlusSin => 1.0 + t.sin(),
            Profile::One => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::OneMinusCos => "1-cos",
            Profile::Sin => "sin",
            Profile::OnePlusSin => "1+sin",
            Profile::One => "1",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "1-cos" | "one_minus_cos" => Ok(Profile::OneMinusCos),
            "sin" => Ok(Profile::Sin),
            "1+sin" | "one_plus_sin" => Ok(Profile::OnePlusSin),
            "1" | "one" => Ok(Profile::One),
            other => Err(Error::Config(format!("unknown profile `{other}`"))),
        }
    }
}

/// Built-in model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Exactly solvable model: `w1 = a`, `v1 = b`, `v0 = 0`,
    /// `w2 = 1 - cos(x - y)`.
    Exact { a: f64, b: f64, w0: f64 },
    /// Threshold family with a one-particle bound state at the bottom edge:
    /// `w2 = ε(x) + l ε(x+y) + ε(y)`, `v1 = sqrt(mu) sin x`, `w1 = 1 + sin² x`.
    CaseI { l: f64, mu: f64 },
    /// Threshold family without accumulation:
    /// `w2 = 2 - cos x - cos y`, `v1 = sqrt(mu) (1 - cos x)`, `w1 = 2 - cos x`.
    CaseII { mu: f64 },
    /// One spin sector of the truncated spin-boson Hamiltonian.
    SpinBoson { sigma: i8, epsilon: f64, alpha: f64, w: Profile, v: Profile },
}

fn eps(t: f64) -> f64 {
    1.0 - t.cos()
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Build the model for a built-in family.
pub fn builtin(family: &Family) -> Result<ModelSpec> {
    let mut spec = match *family {
        Family::Exact { a, b, w0 } => {
            if !(a.is_finite() && b.is_finite() && w0.is_finite()) || a == 0.0 || b == 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "exact model needs finite nonzero a, b (got a = {a}, b = {b}, w0 = {w0})"
                )));
            }
            ModelSpec::new(
                format!("exact(a={a}, b={b}, w0={w0})"),
                w0,
                Arc::new(move |_| a),
                Arc::new(|_| 0.0),
                Arc::new(move |_| b),
                Arc::new(|x, y| 1.0 - (x - y).cos()),
            )?
        }
        Family::CaseI { l, mu } => {
            positive("l", l)?;
            positive("mu", mu)?;
            let s = mu.sqrt();
            ModelSpec::new(
                format!("case1(l={l}, mu={mu})"),
                THRESHOLD_VACUUM_LEVEL,
                Arc::new(|x| 1.0 + x.sin().powi(2)),
                Arc::new(|_| 0.0),
                Arc::new(move |x| s * x.sin()),
                Arc::new(move |x, y| eps(x) + l * eps(x + y) + eps(y)),
            )?
        }
        Family::CaseII { mu } => {
            positive("mu", mu)?;
            let s = mu.sqrt();
            ModelSpec::new(
                format!("case2(mu={mu})"),
                THRESHOLD_VACUUM_LEVEL,
                Arc::new(|x| 2.0 - x.cos()),
                Arc::new(|_| 0.0),
                Arc::new(move |x| s * (1.0 - x.cos())),
                Arc::new(|x, y| 2.0 - x.cos() - y.cos()),
            )?
        }
        Family::SpinBoson { sigma, epsilon, alpha, w, v } => {
            if sigma != 1 && sigma != -1 {
                return Err(Error::InvalidArgument(format!("sigma must be +1 or -1, got {sigma}")));
            }
            positive("epsilon", epsilon)?;
            positive("alpha", alpha)?;
            let se = f64::from(sigma) * epsilon;
            let coupling: Fn1 = Arc::new(move |t| alpha * v.eval(t));
            ModelSpec::new(
                format!("spinboson(sigma={sigma}, epsilon={epsilon}, alpha={alpha}, w={}, v={})", w.name(), v.name()),
                se,
                Arc::new(move |x| -se + w.eval(x)),
                Arc::clone(&coupling),
                coupling,
                Arc::new(move |x, y| se + w.eval(x) + w.eval(y)),
            )?
        }
    };
    spec.family = Some(family.clone());
    Ok(spec)
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::Exact { .. } => "exact",
            Family::CaseI { .. } => "case1",
            Family::CaseII { .. } => "case2",
            Family::SpinBoson { .. } => "spinboson",
        }
    }

    /// Build a family from a tag plus string parameters. Unset parameters take
    /// the documented defaults; unknown keys are rejected.
    pub fn from_params(tag: &str, params: &BTreeMap<String, String>) -> Result<Self> {
        let allowed: &[&str] = match tag {
            "exact" => &["a", "b", "w0"],
            "case1" => &["l", "mu"],
            "case2" => &["mu"],
            "spinboson" => &["sigma", "epsilon", "alpha", "w", "v"],
            other => return Err(Error::Config(format!("unknown model `{other}`"))),
        };
        if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!("model `{tag}` has no parameter `{bad}`")));
        }
        let num = |key: &str, default: f64| -> Result<f64> {
            params.get(key).map_or(Ok(default), |s| parse_number(s))
        };
        Ok(match tag {
            "exact" => Family::Exact { a: num("a", 1.0)?, b: num("b", 1.0)?, w0: num("w0", 0.0)? },
            "case1" => {
                let l = num("l", 2.0)?;
                Family::CaseI { l, mu: num("mu", (1.0 + l) / PI)? }
            }
            "case2" => Family::CaseII { mu: num("mu", 1.0 / PI)? },
            _ => {
                let sigma = num("sigma", 1.0)?;
                if sigma != 1.0 && sigma != -1.0 {
                    return Err(Error::Config(format!("sigma must be +1 or -1, got {sigma}")));
                }
                let profile = |key: &str, default: Profile| -> Result<Profile> {
                    params.get(key).map_or(Ok(default), |s| Profile::parse(s))
                };
                Family::SpinBoson {
                    sigma: sigma as i8,
                    epsilon: num("epsilon", 1.0)?,
                    alpha: num("alpha", 1.0)?,
                    w: profile("w", Profile::OneMinusCos)?,
                    v: profile("v", Profile::Sin)?,
                }
            }
        })
    }
}

/// Parse a real number, accepting the forms `pi`, `c*pi` and `c/pi`.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse `{s}` as a number"));
    let plain = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let value = if s == "pi" {
        PI
    } else if let Some(head) = s.strip_suffix("/pi") {
        plain(head)? / PI
    } else if let Some(head) = s.strip_suffix("*pi") {
        plain(head)? * PI
    } else {
        plain(s)?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

/// Parse `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}
