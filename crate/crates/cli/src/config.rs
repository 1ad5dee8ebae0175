use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use fockspec::friedrichs::{DeltaEvaluator, Tolerances};
use fockspec::grid::{make_grid, TorusGrid};
use fockspec::model::{builtin, parse_key_values, parse_number, Family, ModelSpec};
use fockspec::{Error, Result};

pub const DEFAULT_GRID_N: usize = 128;
pub const MIN_GRID_N: usize = 16;
pub const DEFAULT_COUNT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Model family: exact, case1, case2 or spinboson.
    #[arg(long, global = true)]
    pub model: Option<String>,

    /// Model parameter `key=value` (repeatable). Numbers accept `pi`,
    /// `c*pi` and `c/pi`.
    #[arg(long = "param", global = true, value_name = "KEY=VALUE")]
    pub params: Vec<String>,

    /// Grid size n of the torus discretisation (at least 16).
    #[arg(long, global = true)]
    pub grid_n: Option<usize>,

    /// Spectral parameter (repeatable).
    #[arg(long = "z", global = true, allow_hyphen_values = true)]
    pub z: Vec<String>,

    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Tolerance override `key=value` (repeatable): root_tol, sign_tol,
    /// v_tol, refine_tol, eig_tol, max_iter, adaptive_tol, count_margin.
    #[arg(long = "tol", global = true, value_name = "KEY=VALUE")]
    pub tols: Vec<String>,

    /// Plain `key = value` file. Recognised keys: model, grid_n, z
    /// (comma separated), out, format, tol.<name>; any other key is a model
    /// parameter. Command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Fully resolved run settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub family: Family,
    pub params: BTreeMap<String, String>,
    pub grid_n: usize,
    pub z_values: Vec<f64>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub tols: Tolerances,
    pub adaptive_tol: Option<f64>,
    pub count_margin: f64,
}

fn split_kv(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| Error::Config(format!("expected key=value, got `{s}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs, default_model: &str) -> Result<Self> {
        let mut file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                parse_key_values(&text)?
            }
            None => BTreeMap::new(),
        };

        let model = args.model.clone().or_else(|| file.remove("model")).unwrap_or_else(|| default_model.to_string());
        let file_grid = file.remove("grid_n");
        let file_z = file.remove("z");
        let file_out = file.remove("out");
        let file_format = file.remove("format");

        let mut tol_pairs = Vec::new();
        let mut params = BTreeMap::new();
        for (k, v) in file {
            match k.strip_prefix("tol.") {
                Some(name) => tol_pairs.push((name.to_string(), v)),
                None => {
                    params.insert(k, v);
                }
            }
        }
        for p in &args.params {
            let (k, v) = split_kv(p)?;
            params.insert(k, v);
        }
        for t in &args.tols {
            tol_pairs.push(split_kv(t)?);
        }

        let grid_n = match (args.grid_n, file_grid) {
            (Some(n), _) => n,
            (None, Some(s)) => s.parse().map_err(|_| Error::Config(format!("grid_n `{s}` is not an integer")))?,
            (None, None) => DEFAULT_GRID_N,
        };
        if grid_n < MIN_GRID_N {
            return Err(Error::Config(format!("grid_n must be at least {MIN_GRID_N}, got {grid_n}")));
        }

        let z_values = if args.z.is_empty() {
            match file_z {
                Some(s) => s.split(',').filter(|t| !t.trim().is_empty()).map(parse_number).collect::<Result<_>>()?,
                None => Vec::new(),
            }
        } else {
            args.z.iter().map(|s| parse_number(s)).collect::<Result<_>>()?
        };

        let format = match (args.format, file_format.as_deref()) {
            (Some(f), _) => f,
            (None, Some("csv")) => Format::Csv,
            (None, Some("json")) | (None, None) => Format::Json,
            (None, Some(other)) => return Err(Error::Config(format!("unknown format `{other}`"))),
        };

        let mut tols = Tolerances::default();
        let mut adaptive_tol = None;
        let mut count_margin = DEFAULT_COUNT_MARGIN;
        for (k, v) in tol_pairs {
            let value = parse_number(&v)?;
            match k.as_str() {
                "adaptive_tol" | "count_margin" if !(value >= 0.0) => {
                    return Err(Error::Config(format!("tolerance `{k}` must be nonnegative, got {value}")));
                }
                "adaptive_tol" => adaptive_tol = Some(value),
                "count_margin" => count_margin = value,
                _ => tols.set(&k, value)?,
            }
        }

        let family = Family::from_params(&model, &params)?;
        Ok(Self {
            family,
            params,
            grid_n,
            z_values,
            out: args.out.clone().or(file_out.map(PathBuf::from)),
            format,
            tols,
            adaptive_tol,
            count_margin,
        })
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        make_grid(self.grid_n)
    }

    pub fn model(&self) -> Result<ModelSpec> {
        builtin(&self.family)
    }

    /// The evaluator every command goes through, so grid and tolerance
    /// overrides apply identically.
    pub fn evaluator(&self) -> Result<DeltaEvaluator> {
        let eval = DeltaEvaluator::new(self.model()?, self.grid()?).with_tolerances(self.tols);
        match self.adaptive_tol {
            Some(t) => eval.with_adaptive_tol(t),
            None => Ok(eval),
        }
    }
}
