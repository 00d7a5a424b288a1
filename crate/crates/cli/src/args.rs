use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kmfg_core::Branch;

#[derive(Debug, Parser)]
#[command(name = "kmfg", version, about = "Stability analysis and kinetic solvers for flocking mean-field games")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues of the linearized forward operator.
    ForwardSpectrum(SpectrumArgs),
    /// Critical noise of the forward model by bisection.
    ForwardSigmaC(SigmaCArgs),
    /// Nonlinear forward simulation from a perturbed equilibrium.
    ForwardSimulate(SimulateArgs),
    /// Eigenvalues of the mean-field game matrix and the stability verdict.
    MfgSpectrum(SpectrumArgs),
    /// Critical unit control cost by bisection.
    MfgRc(RcArgs),
    /// Critical unit control cost over a list of noise levels.
    MfgRcSweep(RcSweepArgs),
    /// Linearized forward-backward problem solved through the Riccati decoupling.
    MfgBvp(BvpArgs),
    /// Picard iteration for the nonlinear mean-field game.
    MfgPicard(PicardArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ForwardSpectrum(_) => "forward-spectrum",
            Command::ForwardSigmaC(_) => "forward-sigma-c",
            Command::ForwardSimulate(_) => "forward-simulate",
            Command::MfgSpectrum(_) => "mfg-spectrum",
            Command::MfgRc(_) => "mfg-rc",
            Command::MfgRcSweep(_) => "mfg-rc-sweep",
            Command::MfgBvp(_) => "mfg-bvp",
            Command::MfgPicard(_) => "mfg-picard",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BranchArg {
    Positive,
    Negative,
    Disordered,
}

impl From<BranchArg> for Branch {
    fn from(b: BranchArg) -> Self {
        match b {
            BranchArg::Positive => Branch::Positive,
            BranchArg::Negative => Branch::Negative,
            BranchArg::Disordered => Branch::Disordered,
        }
    }
}

/// Flags shared by every subcommand. Unset values fall back to the config
/// file, then to the library defaults.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// key=value file supplying defaults for any flag.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides KMFG_OUT_DIR).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Domain length.
    #[arg(long)]
    pub l: Option<f64>,
    /// Interaction strength.
    #[arg(long)]
    pub h: Option<f64>,
    /// Noise intensity.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Unit control cost.
    #[arg(long)]
    pub r: Option<f64>,
    /// Local eigenfunctions per Fourier mode.
    #[arg(long)]
    pub p: Option<usize>,
    /// Quadrature nodes (default max(4P, 80)).
    #[arg(long)]
    pub quad_nodes: Option<usize>,
    #[arg(long, value_enum)]
    pub branch: Option<BranchArg>,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: Common,
    /// Fourier modes, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub k: Option<Vec<i32>>,
}

#[derive(Debug, Clone, Args)]
pub struct SigmaCArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub k: Option<i32>,
    #[arg(long)]
    pub sigma_lo: Option<f64>,
    #[arg(long)]
    pub sigma_hi: Option<f64>,
    /// Bisection stops once the bracket is narrower than this.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RcArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub k: Option<i32>,
    #[arg(long)]
    pub r_lo: Option<f64>,
    #[arg(long)]
    pub r_hi: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RcSweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Noise levels, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub sigmas: Option<Vec<f64>>,
    #[arg(long)]
    pub k: Option<i32>,
    #[arg(long)]
    pub r_lo: Option<f64>,
    #[arg(long)]
    pub r_hi: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct BvpArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub k: Option<i32>,
    /// Horizon; defaults to 10 / |max Re spec(A_c)|.
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Number of output times.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Seed for the random initial coefficients.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Kinetic grid flags.
#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub nu: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Snapshot stride in time steps.
    #[arg(long)]
    pub record_every: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Perturbed Fourier mode.
    #[arg(long)]
    pub k: Option<usize>,
    /// Perturbation amplitude relative to the equilibrium density.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Start of the growth-rate fit window.
    #[arg(long)]
    pub fit_start: Option<f64>,
    /// End of the growth-rate fit window (clipped to the linear regime).
    #[arg(long)]
    pub fit_end: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PicardArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub damping: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Previous iterates kept for Anderson mixing; 0 disables it.
    #[arg(long)]
    pub anderson_depth: Option<usize>,
}
