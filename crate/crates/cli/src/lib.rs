//! `serfati` command line: simulation runs, kernel certification, identity
//! checks, initial-data approximation and paired-run comparison.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GUARDRAIL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("run aborted: {0}")]
    Guardrail(String),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Guardrail(_) => EXIT_GUARDRAIL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "serfati", version, about = "2D Euler flows with bounded vorticity: runs, certifications, comparisons")]
pub struct Cli {
    /// Worker threads (falls back to SERFATI_THREADS, then all cores).
    #[arg(long, global = true, env = "SERFATI_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the solver on a JSON config and write snapshots, the conservation table and a manifest.
    Simulate(SimulateArgs),
    /// Sweep the near- and far-field kernel L1 estimates over epsilon.
    CertifyKernels(CertifyArgs),
    /// Evaluate the velocity-identity residual of a scenario's exact trajectory.
    CheckIdentity(IdentityArgs),
    /// Check the compactly supported approximating sequence for a scenario's initial velocity.
    ApproxInit(ApproxArgs),
    /// Run two configs and compare them against the continuous-dependence bound.
    Compare(CompareArgs),
    /// List shipped scenarios.
    ListScenarios,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Dotted override, e.g. `--set dt=0.01 --set quadrature.radial_nodes=32`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Plane,
    Disk,
    Obstacle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    /// `K_Omega`
    Domain,
    /// `J = K_Omega + Kbar`
    Hydrodynamic,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct CertifyArgs {
    #[arg(long, value_enum)]
    pub domain: DomainArg,
    /// Defaults to `domain` in the plane and `hydrodynamic` outside an obstacle.
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0])]
    pub eps: Vec<f64>,
    /// Evaluation points as x1,x2 pairs; the suite's points by default.
    #[arg(long = "x", value_delimiter = ',')]
    pub points: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct IdentityArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long = "x", value_delimiter = ',', default_values_t = [0.3, -0.1])]
    pub x: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, default_value_t = 4)]
    pub time_nodes: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ApproxArgs {
    #[arg(long, default_value = "blob")]
    pub scenario: String,
    #[arg(long, value_delimiter = ',', default_values_t = [4usize, 8, 16])]
    pub n: Vec<usize>,
    /// Half-width of the check window about the scenario's window centre.
    #[arg(long, default_value_t = 3.0)]
    pub half: f64,
    #[arg(long, default_value_t = 25)]
    pub nodes: usize,
    #[arg(long, default_value_t = 256)]
    pub boundary_samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub against: PathBuf,
    /// Overrides applied to both configs.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Initial S-norm distance; measured on the grid when absent.
    #[arg(long)]
    pub s0: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Parse `argv` (program name first) and execute; returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        // a second build in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::execute(&cli.command, &args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
