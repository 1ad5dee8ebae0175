//! `fockspec` command-line front end.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fockspec::Error;

use config::{CommonArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "fockspec", version, about = "Spectral analysis of three-block operators on the truncated Fock space over the torus")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Essential spectrum: the branch set σ, the band [m, M] and E_min / E_max.
    ///
    /// CSV columns: kind (sigma | band | essential), lo, hi.
    Ess,
    /// Position of E_min relative to the band and the zeros of Δ(·; E_min).
    ///
    /// CSV columns: key, value.
    Classify,
    /// Eigenvalue counts N(z) below each --z via the Birman–Schwinger operator.
    ///
    /// Without --z the ladder E_min - {1e-1, 1e-2, 1e-3, 1e-4} is used.
    /// CSV columns: z, count, borderline, top_eigenvalue.
    Count,
    /// Closed-form eigenvalues of the exactly solvable model.
    ///
    /// CSV columns: branch, k, xi, multiplicity, equation_residual,
    /// residual_vs_oracle.
    Exact {
        /// Largest Fourier index.
        #[arg(long, default_value_t = 8)]
        kmax: u32,
        /// Compare against the direct discretisation on this grid.
        #[arg(long)]
        oracle_n: Option<usize>,
    },
    /// Critical coupling, comparison limit and grid-growth table for the
    /// threshold families. Override the coupling with --param mu=...
    ///
    /// CSV columns: n, dim, count, min_eig.
    Thresholds {
        /// 1 or 2.
        #[arg(long)]
        case: String,
        /// Coupling l of case 1.
        #[arg(long)]
        l: Option<f64>,
        /// Grid sizes for the growth table.
        #[arg(long, value_delimiter = ',', default_value = "24,32,48")]
        grids: Vec<usize>,
    },
    /// Two-photon spin-boson truncation: α0, both spin sectors and their
    /// counts below E_min. Parameters: epsilon, alpha, w, v.
    ///
    /// CSV columns: sector, z, count.
    App,
    /// Eigenvalues of the direct discretisation below --z (default E_min).
    ///
    /// CSV columns: value, multiplicity, spread.
    Oracle,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ess => "ess",
            Command::Classify => "classify",
            Command::Count => "count",
            Command::Exact { .. } => "exact",
            Command::Thresholds { .. } => "thresholds",
            Command::App => "app",
            Command::Oracle => "oracle",
        }
    }

    fn default_model(&self) -> &'static str {
        match self {
            Command::App => "spinboson",
            _ => "exact",
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::Domain(_) | Error::Divergence(_) | Error::PositivityViolation { .. } => 3,
        Error::ResourceGuard(_) => 4,
        Error::Convergence(_) | Error::NonFinite { .. } | Error::EstimationFailed(_) | Error::Eigensolver(_) => 5,
    }
}

fn run(cli: &Cli) -> fockspec::Result<()> {
    let cfg = RunConfig::resolve(&cli.common, cli.command.default_model())?;
    let rendered = match &cli.command {
        Command::Ess => commands::ess(&cfg)?,
        Command::Classify => commands::classify(&cfg)?,
        Command::Count => commands::count(&cfg)?,
        Command::Exact { kmax, oracle_n } => commands::exact(&cfg, *kmax, *oracle_n)?,
        Command::Thresholds { case, l, grids } => commands::thresholds(&cfg, case, *l, grids)?,
        Command::App => commands::app(&cfg)?,
        Command::Oracle => commands::oracle(&cfg)?,
    };
    let text = rendered.text(cli.command.name(), cfg.format)?;
    output::emit(&text, cfg.out.as_deref()).map_err(|e| Error::Config(format!("cannot write output: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fockspec: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
