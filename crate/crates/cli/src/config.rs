use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use sepcheck::{Config, Error, Family, Result, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Separable,
    Ppt,
    Werner,
    Isotropic,
    Tiles,
    MaximallyMixed,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Separable => Family::SeparableRandom,
            FamilyArg::Ppt => Family::PptRandom,
            FamilyArg::Werner => Family::Werner,
            FamilyArg::Isotropic => Family::Isotropic,
            FamilyArg::Tiles => Family::TilesUpb,
            FamilyArg::MaximallyMixed => Family::MaximallyMixed,
        }
    }
}

/// Separability checks for low-rank bipartite density matrices.
///
/// Exit codes: 0 separable (or success), 1 entangled, 2 inconclusive, 3 error.
#[derive(Debug, Parser)]
#[command(name = "sepcheck", version)]
pub struct Cli {
    /// Relative singular-value cutoff for numerical rank.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol_rank: f64,
    /// Eigenvalue floor, scaled by the trace.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol_psd: f64,
    /// Allowed Frobenius reconstruction residual.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol_residual: f64,
    /// Allowed residual for polynomial roots and kernel constraints.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tol_root: f64,
    #[arg(long, global = true, env = "SEPCHECK_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Subsets tried when fitting a certificate.
    #[arg(long, global = true, default_value_t = 100_000)]
    pub budget_subsets: usize,
    /// Random Alice directions tried by the rank-N decomposition.
    #[arg(long, global = true, default_value_t = 64)]
    pub budget_directions: usize,
    /// Sweep limit for the best separable approximation.
    #[arg(long, global = true, default_value_t = 200)]
    pub max_iters: usize,
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true, env = "SEPCHECK_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dimensions, ranks, kernel sizes and the PPT flag.
    Inspect { path: PathBuf },
    /// Runs the full pipeline and prints the verdict.
    Certify {
        path: PathBuf,
        /// Where to write the certificate of a separable verdict
        /// (default: `<path>.certificate.json`).
        #[arg(long)]
        certificate: Option<PathBuf>,
        /// Skip writing the certificate file.
        #[arg(long)]
        no_sidecar: bool,
    },
    /// Writes a generated state, plus its planted decomposition when there is one.
    Generate {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, num_args = 2, value_names = ["M", "N"], default_values_t = [2, 2])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        terms: usize,
        /// Exact r(ρ) target.
        #[arg(long)]
        rank: Option<usize>,
        /// Exact r(ρ^TA) target.
        #[arg(long)]
        rank_pt: Option<usize>,
        /// Mixing parameter for the Werner and isotropic families.
        #[arg(long, default_value_t = 0.0)]
        p: f64,
        /// Output path; stdout when omitted. The decomposition goes to `<out>.decomposition.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partial-transpose test. Exit 0 when PPT, 1 otherwise.
    Ppt { path: PathBuf },
    /// Decomposition of a rank-N PPT state.
    Decompose { path: PathBuf },
    /// Enumerates eligible product vectors.
    EligibleVectors { path: PathBuf },
    /// Best separable approximation over given or enumerated product vectors.
    Bsa {
        path: PathBuf,
        /// Decomposition document whose vectors are used as projectors.
        #[arg(long)]
        projectors: Option<PathBuf>,
    },
}

impl Cli {
    pub fn tolerances(&self) -> Result<Tolerances> {
        Tolerances::new(self.tol_rank, self.tol_psd, self.tol_residual, self.tol_root)
    }

    pub fn config(&self) -> Result<Config> {
        if self.budget_directions == 0 || self.max_iters == 0 {
            return Err(Error::PreconditionFailed("budgets must be positive".into()));
        }
        Ok(Config {
            tol: self.tolerances()?,
            seed: self.seed,
            direction_attempts: self.budget_directions,
            subset_budget: self.budget_subsets,
            bsa_max_iters: self.max_iters,
            ..Config::default()
        })
    }
}
