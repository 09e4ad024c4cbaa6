use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Parser)]
#[command(name = "cmc-index", version, about = "Weak stability index of CMC hypersurfaces of spheres")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the rendered report here instead of standard output (sweep: the CSV table).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Record wall-clock time in the report.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Weak and strong stability index.
    Index(IndexArgs),
    /// Jacobi spectrum below a window.
    Spectrum(SpectrumArgs),
    /// Identity, lemma and certificate batteries.
    Verify(VerifyArgs),
    /// Exact index along a Clifford radius sweep.
    Sweep(SweepArgs),
    /// Check an immersion sample file.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Clifford,
    Umbilical,
    ControlNoncmc,
    File,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Clifford => "clifford",
            Family::Umbilical => "umbilical",
            Family::ControlNoncmc => "control-noncmc",
            Family::File => "file",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[arg(long)]
    pub r2: Option<f64>,
    /// Hypersurface dimension of the umbilical family.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Base radius of the non-CMC control torus.
    #[arg(long)]
    pub r0: Option<f64>,
    /// Immersion sample file.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Use the opposite unit normal.
    #[arg(long)]
    pub flip: bool,
}

#[derive(Debug, Clone, Args)]
pub struct IndexArgs {
    #[arg(value_enum)]
    pub family: Family,
    #[command(flatten)]
    pub fam: FamilyArgs,
    #[arg(long, conflicts_with = "discrete")]
    pub exact: bool,
    #[arg(long)]
    pub discrete: bool,
    #[arg(long)]
    pub grid: Option<usize>,
    /// Zero tolerance; default 0 on the exact path and 1e-2 on the discrete path.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Count by dense eigen-decomposition instead of banded LDL^T.
    #[arg(long)]
    pub dense: bool,
    /// Keep the rotational Jacobi fields in the count.
    #[arg(long)]
    pub no_deflate: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[arg(value_enum)]
    pub family: Family,
    #[command(flatten)]
    pub fam: FamilyArgs,
    #[arg(long)]
    pub discrete: bool,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub window: f64,
    /// Tolerance of the first-eigenvalue bound check.
    #[arg(long, default_value_t = 1e-9)]
    pub tau: f64,
    /// Bisection width for discrete eigenvalues.
    #[arg(long, default_value_t = 1e-6)]
    pub eigen_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Identities,
    Lemma,
    Theorem,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Identities => "identities",
            Target::Lemma => "lemma",
            Target::Theorem => "theorem",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub target: Target,
    #[arg(long, value_enum)]
    pub family: Family,
    #[command(flatten)]
    pub fam: FamilyArgs,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Admissibility tolerance relative to `sqrt(area) |u|`.
    #[arg(long, default_value_t = 1e-8)]
    pub tau_adm: f64,
    /// Strict-negativity margin relative to the area.
    #[arg(long, default_value_t = 1e-6)]
    pub tau_strict: f64,
    /// Inequality tolerance relative to the area.
    #[arg(long, default_value_t = 1e-4)]
    pub ineq_tol: f64,
    /// Zero tolerance of the index computed alongside the certificate.
    #[arg(long, default_value_t = 1e-2)]
    pub tau: f64,
    #[arg(long, default_value_t = 5e-3)]
    pub identity_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub lemma_tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    /// Explicit radii, comma separated; overrides the range.
    #[arg(long, value_delimiter = ',')]
    pub r2: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub r2_min: f64,
    #[arg(long, default_value_t = 0.95)]
    pub r2_max: f64,
    #[arg(long, default_value_t = 19)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub file: PathBuf,
    /// Tolerance on `| |phi| - 1 |` and tangency.
    #[arg(long, default_value_t = 1e-10)]
    pub sphere_tol: f64,
    #[arg(long)]
    pub flip: bool,
}
