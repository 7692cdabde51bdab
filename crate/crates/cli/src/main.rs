//! `plap`: command-line frontend for the p-Laplacian eigenvalue toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 validation
//! failure.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod manifest;
mod output;
mod svg;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "plap", version, about = "Dirichlet p-Laplacian eigenvalue branches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags accepted by every subcommand. Unset values fall back to the config
/// file, then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Shared {
    /// Mesh resolution (cells along the shorter side).
    #[arg(long)]
    pub n: Option<usize>,
    /// Exponent p > 1.
    #[arg(long)]
    pub p: Option<f64>,
    /// Rectangle width.
    #[arg(long)]
    pub a: Option<f64>,
    /// Rectangle height.
    #[arg(long)]
    pub b: Option<f64>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Command-specific tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Rect,
    Tri,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Wrt {
    P,
    A,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// First eigenvalue on a rectangle or the unit triangle.
    Eig1 {
        #[arg(long, value_enum, default_value = "rect")]
        domain: DomainArg,
        #[command(flatten)]
        shared: Shared,
    },
    /// Continuation of a named branch over a p-grid, as CSV.
    Branch {
        #[arg(long, default_value = "lambda1")]
        label: String,
        #[arg(long)]
        p_from: f64,
        #[arg(long)]
        p_to: f64,
        #[arg(long, default_value_t = 0.1)]
        p_step: f64,
        #[command(flatten)]
        shared: Shared,
    },
    /// Derivative of lambda_1 in p or in the rectangle width, with a
    /// finite-difference error estimate.
    Deriv {
        #[arg(long, value_enum, default_value = "p")]
        wrt: Wrt,
        #[arg(long, value_enum, default_value = "rect")]
        domain: DomainArg,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[command(flatten)]
        shared: Shared,
    },
    /// Closed-form quadrature constants of the square.
    Numvalues {
        #[arg(long)]
        which: String,
        #[command(flatten)]
        shared: Shared,
    },
    /// Crossing of two named branches inside a p-bracket.
    Crossing {
        #[arg(long)]
        branch_a: String,
        #[arg(long)]
        branch_b: String,
        #[arg(long, num_args = 2, required = true, value_names = ["LO", "HI"])]
        bracket: Vec<f64>,
        #[command(flatten)]
        shared: Shared,
    },
    /// Three-disk packing bound: closed form and masked-mesh value.
    Packing {
        #[command(flatten)]
        shared: Shared,
    },
    /// Branch diagram as SVG with a CSV sidecar.
    Diagram {
        /// Comma-separated branch labels; defaults depend on the aspect.
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
        #[arg(long)]
        p_from: f64,
        #[arg(long)]
        p_to: f64,
        #[arg(long, default_value_t = 0.05)]
        p_step: f64,
        #[command(flatten)]
        shared: Shared,
    },
    /// Runs the invariant suite; exit 0 iff every check passes.
    Validate {
        #[command(flatten)]
        shared: Shared,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}

fn run(command: Command) -> anyhow::Result<u8> {
    use commands as c;
    match command {
        Command::Eig1 { domain, shared } => c::eig1(domain, &shared),
        Command::Branch { label, p_from, p_to, p_step, shared } => c::branch(&label, p_from, p_to, p_step, &shared),
        Command::Deriv { wrt, domain, step, shared } => c::deriv(wrt, domain, step, &shared),
        Command::Numvalues { which, shared } => c::numvalues(&which, &shared),
        Command::Crossing { branch_a, branch_b, bracket, shared } => {
            c::crossing(&branch_a, &branch_b, (bracket[0], bracket[1]), &shared)
        }
        Command::Packing { shared } => c::packing(&shared),
        Command::Diagram { labels, p_from, p_to, p_step, shared } => c::diagram(&labels, p_from, p_to, p_step, &shared),
        Command::Validate { shared } => c::validate(&shared),
    }
}
