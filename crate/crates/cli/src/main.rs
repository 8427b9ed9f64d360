use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qps::Error;

mod commands;
mod output;

#[derive(Parser, Debug)]
#[command(name = "qps", version, about = "Quantum phase-space states, distributions and invariant checks")]
pub struct Cli {
    /// Reduced Planck constant used when an input does not fix it.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub hbar: f64,
    /// Phase gauge: zero, full, half or const:<value>.
    #[arg(long, global = true, default_value = "zero")]
    pub gauge: String,
    /// Coordinate grid, "min:max:n" per axis, comma separated.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Phase grid, "pmin:pmax:np,xmin:xmax:nx" per pair, pairs separated by ';'.
    #[arg(long, global = true)]
    pub pgrid: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Tolerance override NAME=VALUE (repeatable).
    #[arg(long = "tol", global = true)]
    pub tol: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a state and write its samples and measured moments.
    #[command(subcommand)]
    State(StateCommand),
    /// Export a phase-space distribution of a stored state.
    Dist {
        /// Wavefunction or density sidecar JSON.
        state: PathBuf,
        #[arg(long, value_enum)]
        kind: DistArg,
    },
    /// Run an invariant suite and print its JSON report.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
    },
    /// Evolve a density matrix under a Hamiltonian and write snapshots.
    Evolve {
        /// Density sidecar JSON.
        density: PathBuf,
        /// Built-in Hamiltonian ℏω(𝔑 + D/2).
        #[arg(long, default_value = "number_omega")]
        hamiltonian: String,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        /// Hamiltonian as a row,col,re,im CSV in the density's basis (overrides --hamiltonian).
        #[arg(long)]
        hamiltonian_csv: Option<PathBuf>,
        /// Final time.
        #[arg(long)]
        t: f64,
        /// Number of evenly spaced snapshots after t = 0.
        #[arg(long, default_value_t = 8)]
        snapshots: usize,
        /// Also write a Husimi-type distribution per snapshot.
        #[arg(long)]
        husimi: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum StateCommand {
    /// Joint state from a JSON spec.
    Synth {
        spec: PathBuf,
        /// Also write the density matrix projected on this many levels per axis.
        #[arg(long)]
        basis: Option<usize>,
        #[arg(long, default_value = "state")]
        name: String,
    },
    /// Number state of a reference joint state (ground form by default).
    Fock {
        /// Occupation per axis, comma separated.
        #[arg(long)]
        n: String,
        /// Reference joint-state spec.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Levels per axis of the written density matrix (default n + 1).
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long, default_value = "fock")]
        name: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DistArg {
    Husimi,
    Wigner,
    Phasewave,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SuiteArg {
    Uncertainty,
    Closure,
    Microstate,
    Fock,
    Gauge,
    Density,
    All,
}

/// Stable exit-code contract.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Coverage(_) => 3,
        Error::Unsupported(_) => 4,
        _ => 2,
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("QPS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("qps: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
