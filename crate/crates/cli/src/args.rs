use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "qpt",
    version,
    about = "Exact diagonalization, concurrence and transition analysis for small spin-1/2 chains and ladders",
    after_help = "No environment variables are read; every setting comes from flags or --config."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lowest eigenstates of one Hamiltonian with their quantum numbers
    Spectrum(RunArgs),
    /// Energies, correlators and concurrence along a parameter grid
    Sweep(RunArgs),
    /// Transition type (I, II, III or none) of a sweep, or the table1 preset
    Classify(RunArgs),
    /// Commutator sum rule residuals on the full-basis ground state
    Sumrule(RunArgs),
    /// Derivative extrema of the concurrence across lattice sizes
    Scaling(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::Sweep(_) => "sweep",
            Command::Classify(_) => "classify",
            Command::Sumrule(_) => "sumrule",
            Command::Scaling(_) => "scaling",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Spectrum(a) | Command::Sweep(a) | Command::Classify(a) | Command::Sumrule(a) | Command::Scaling(a) => a,
        }
    }
}

/// Flags shared by every command. Each one overrides the matching key of the
/// config file.
#[derive(Debug, Default, clap::Args)]
pub struct RunArgs {
    /// TOML (or JSON, by extension) run configuration
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// j1j2, xxz, ising, ladder or xyz
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub j1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub j2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub j_leg: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub j_rung: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub jx: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub jy: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub jz: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<f64>,

    /// Total number of sites (twice the rung count on a ladder)
    #[arg(long)]
    pub sites: Option<usize>,

    /// Eigenstates reported per point
    #[arg(long)]
    pub levels: Option<usize>,
    /// Lanczos residual tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Lanczos start-vector seed, hexadecimal
    #[arg(long)]
    pub seed: Option<String>,
    /// Largest dimension ever diagonalized densely
    #[arg(long)]
    pub dense_cap: Option<usize>,
    /// Lanczos budget of operator applications
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Worker threads (default: number of processors)
    #[arg(long)]
    pub threads: Option<usize>,

    /// Parameter grid as name:min:max:step
    #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
    pub sweep: Option<String>,
    /// Site pairs: nn, leg, rung or i-j, comma separated
    #[arg(long, value_delimiter = ',')]
    pub pairs: Option<Vec<String>>,
    /// Collective operators for sumrule, e.g. uniform_x,staggered_z
    #[arg(long, value_delimiter = ',')]
    pub operator: Option<Vec<String>>,
    /// Lattice sizes for scaling, comma separated
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Derivative order for scaling
    #[arg(long)]
    pub order: Option<usize>,
    /// min or max
    #[arg(long)]
    pub extremum: Option<String>,
    /// Concurrence jump counted as a discontinuity by classify
    #[arg(long)]
    pub jump_tol: Option<f64>,
    /// Classify the unclamped concurrence
    #[arg(long)]
    pub raw: bool,
    /// Canned classify scenarios (table1)
    #[arg(long)]
    pub preset: Option<String>,

    /// json or csv (csv only for sweep)
    #[arg(long)]
    pub format: Option<String>,
    /// Output file (default: standard output)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Leave wall time out of the JSON envelope
    #[arg(long)]
    pub no_timing: bool,
    /// Log progress to standard error
    #[arg(short, long)]
    pub verbose: bool,
}
