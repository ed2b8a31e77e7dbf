//! `dirac`: command-line front end for the engines in `dirac_core`.

mod commands;
mod report;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "dirac", version, about = "Exact engines for Dirac structures, Courant algebroids and their deformations")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Output format (default: json, or csv for ihs-run).
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Seed for every randomized part of a command.
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Table,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check [μ,μ] = 0 for a Lie structure given by structure constants.
    CheckJacobi { input: PathBuf },
    /// Chevalley-Eilenberg cohomology with adjoint coefficients.
    CeCohomology {
        input: PathBuf,
        /// Only this degree (default: all degrees 0..=dim).
        #[arg(long)]
        degree: Option<usize>,
    },
    /// Rigidity report and order-by-order deformation of a Lie structure.
    DeformLie {
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
    },
    /// Inspect a linear Dirac structure on V ⊕ V*.
    DiracLinear { input: PathBuf },
    /// Check the Courant axioms for a split Courant algebroid.
    CourantVerify {
        input: PathBuf,
        /// Total polynomial degree of the test sections.
        #[arg(long, default_value_t = 1)]
        degree: u32,
    },
    /// Bidegree components of {Θ,Θ}.
    ThetaMaster { input: PathBuf },
    /// Order-by-order deformation of the Dirac structure L.
    DeformDirac {
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        /// Maximal q-degree of the unknowns in the polynomial case.
        #[arg(long, default_value_t = 2)]
        degree_cap: u32,
    },
    /// Super-Darboux bracket table for a Rothstein bracket.
    RothsteinCheck {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        /// `flat`, `random` or `random-seed=N`.
        #[arg(long, default_value = "flat")]
        gamma: String,
        /// Polynomial degree of a random connection.
        #[arg(long, default_value_t = 2)]
        degree: u32,
    },
    /// Simulate an implicit Hamiltonian system; CSV trajectory.
    IhsRun {
        #[arg(long)]
        system: PathBuf,
        /// Initial point, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Step size (overrides the system file).
        #[arg(long)]
        h: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(out) => {
            print!("{}", out.text);
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
