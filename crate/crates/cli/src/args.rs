use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use parnes_core::operators::OperatorKind;

#[derive(Debug, Parser)]
#[command(
    name = "parnes",
    version,
    about = "Sparse recovery solvers and benchmark harness"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a problem bundle directory.
    Gen(GenArgs),
    /// Run one solver on a bundle and print a JSON report.
    Solve(SolveArgs),
    /// Run a benchmark suite and write a CSV plus manifest.
    Bench(BenchArgs),
    /// Compute a tight reference solution for a bundle.
    Reference(ReferenceArgs),
}

/// Settings shared by the LASSO-type solvers.
#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    /// Operator-application budget; runs that would exceed it are DNC.
    #[arg(long, default_value_t = 20_000)]
    pub max_matvec: u64,
    /// Duality-gap / root tolerance (default 1e-6; the prox-ablation bench uses 1e-3).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Lipschitz constant override (default: power-iteration estimate of ||A||^2).
    #[arg(long = "L")]
    pub lipschitz: Option<f64>,
    /// Restricted-isometry proxy in the restart period.
    #[arg(long, default_value_t = 1.0)]
    pub rip_delta: f64,
    /// Fixed number of inner steps per restart cycle.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Accept every prox-center update.
    #[arg(long)]
    pub no_restart_check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Gaussian,
    Pdct,
}

impl From<Kind> for OperatorKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Gaussian => OperatorKind::Dense,
            Kind::Pdct => OperatorKind::PartialDct,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    /// Number of nonzeros; 0 generates a power-law (approximately sparse) signal.
    #[arg(long)]
    pub s: usize,
    #[arg(long, default_value_t = 0.0)]
    pub dr_db: f64,
    /// Power-law exponent for s = 0.
    #[arg(long, default_value_t = 1.0)]
    pub decay: f64,
    /// Per-entry noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Draw magnitude exponents uniformly instead of on a log grid.
    #[arg(long)]
    pub uniform_exponents: bool,
    /// Keep raw N(0, 1/m) Gaussian columns instead of normalizing them.
    #[arg(long)]
    pub raw_columns: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    NestaLasso,
    Apg,
    Parnes,
    Fista,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::NestaLasso => "nesta-lasso",
            SolverKind::Apg => "apg",
            SolverKind::Parnes => "parnes",
            SolverKind::Fista => "fista",
        }
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("param").required(true).args(["tau", "sigma", "lambda"])))]
pub struct SolveArgs {
    /// Bundle directory.
    pub bundle: PathBuf,
    #[arg(long, value_enum)]
    pub solver: SolverKind,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[command(flatten)]
    pub flags: SolverFlags,
    /// FISTA relative objective-change tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Seed echoed in the report (default: the bundle's seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the solution as little-endian f64.
    #[arg(long)]
    pub save_x: Option<PathBuf>,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Zero all timing fields so reports are byte-reproducible.
    #[arg(long)]
    pub reproducible: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("param").required(true).args(["tau", "lambda"])))]
pub struct ReferenceArgs {
    /// Bundle directory.
    pub bundle: PathBuf,
    /// Penalized form: FISTA to a 1e-14 relative objective change.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Constrained form: long-run LASSO solve to a 1e-12 duality gap.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long = "L")]
    pub lipschitz: Option<f64>,
    /// Output directory for x_ref.f64le and ref.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchName {
    ProxAblation,
    DynamicRange,
    ApproxSparse,
}

impl BenchName {
    pub fn name(self) -> &'static str {
        match self {
            BenchName::ProxAblation => "prox-ablation",
            BenchName::DynamicRange => "dynamic-range",
            BenchName::ApproxSparse => "approx-sparse",
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(value_enum)]
    pub name: BenchName,
    /// Output directory for `<name>.csv` and `manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed; instance i uses seed + i.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Instances per grid point.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// Worker threads for independent instances.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub flags: SolverFlags,
    /// Signal length (default 8192, or 262144 with --full-scale).
    #[arg(long)]
    pub n: Option<usize>,
    /// Measurements (default n/8).
    #[arg(long)]
    pub m: Option<usize>,
    /// Nonzeros for the dynamic-range sweep (default m/5).
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, value_enum, default_value_t = Kind::Pdct)]
    pub kind: Kind,
    /// Per-entry noise (default 0.1; 1e-3 for approx-sparse).
    #[arg(long)]
    pub noise: Option<f64>,
    /// Dynamic ranges in dB.
    #[arg(long, value_delimiter = ',', default_values_t = [20.0, 40.0, 60.0, 80.0, 100.0])]
    pub dr_db: Vec<f64>,
    /// Power-law exponent for approx-sparse.
    #[arg(long, default_value_t = 1.0)]
    pub decay: f64,
    /// Methods to run (parnes, apg, fista; prox-ablation runs nesta-lasso and apg).
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Use n = 262144.
    #[arg(long)]
    pub full_scale: bool,
    /// Fixed manifest timestamp (SOURCE_DATE_EPOCH or 0) for byte-reproducible output.
    #[arg(long)]
    pub reproducible: bool,
}
