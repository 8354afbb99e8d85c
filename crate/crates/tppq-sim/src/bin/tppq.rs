//! `tppq`: pulse-level simulation and gate calibration for the
//! transmon-resonator-PPQ system.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tppq_sim::cli::{self, GlobalArgs, Resolved};

#[derive(Parser)]
#[command(
    name = "tppq",
    about = "Pulse-level simulator and gate-calibration toolkit for a transmon + parity-protected-qubit hybrid system",
    version
)]
struct Cli {
    /// Run config (TOML); built-in reference values when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override run.rng_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override run.tau_ns (Suzuki-Trotter step, ns).
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Idle spectra of both qubits plus dressed transition frequencies.
    Spectrum,
    /// Bisect the flux bias to hit a target transmon f01 (GHz).
    Calibrate {
        #[arg(long)]
        target: f64,
    },
    /// Propagate an initial state and dump Bloch trajectories.
    Simulate {
        /// Gate schedule to run: cnot, rx-t, rx-p or free.
        #[arg(long, default_value = "cnot")]
        gate: String,
        /// Initial state: 00, 01, 10, 11 or a JSON amplitude file.
        #[arg(long, default_value = "00")]
        initial: String,
        /// Duration in ns (free evolution only).
        #[arg(long)]
        duration: Option<f64>,
        /// Include the 64 complex amplitudes in the trajectory CSV.
        #[arg(long)]
        amplitudes: bool,
    },
    /// Average gate fidelity of a schedule against its ideal target.
    Fidelity {
        #[arg(long, default_value = "cnot")]
        gate: String,
    },
    /// Nelder-Mead pulse-parameter optimization.
    Optimize {
        #[arg(long, default_value = "cnot")]
        gate: String,
        /// Comma-separated parameter names to free (gate-specific default).
        #[arg(long)]
        mask: Option<String>,
        /// Objective evaluation budget.
        #[arg(long)]
        max_evals: Option<usize>,
        /// Time step during optimizer iterations, ns.
        #[arg(long)]
        tau_coarse: Option<f64>,
    },
    /// Suzuki-Trotter vs exact-diagonalization state-error scan.
    TrotterScan {
        /// Comma-separated τ values in ns (log-spaced default).
        #[arg(long)]
        taus: Option<String>,
        /// Free-evolution window in ns.
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
    },
    /// Basis-state tomography table of a gate.
    Tomography {
        #[arg(long, default_value = "cnot")]
        gate: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let globals = GlobalArgs { config: cli.config, out: cli.out, seed: cli.seed, tau: cli.tau };
    let resolved = match Resolved::new(&globals) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let outcome = match &cli.command {
        Command::Spectrum => cli::cmd_spectrum(&resolved),
        Command::Calibrate { target } => cli::cmd_calibrate(&resolved, *target),
        Command::Simulate { gate, initial, duration, amplitudes } => {
            cli::cmd_simulate(&resolved, gate, initial, *duration, *amplitudes)
        }
        Command::Fidelity { gate } => cli::cmd_fidelity(&resolved, gate),
        Command::Optimize { gate, mask, max_evals, tau_coarse } => {
            cli::cmd_optimize(&resolved, gate, mask.as_deref(), *max_evals, *tau_coarse)
        }
        Command::TrotterScan { taus, duration } => {
            cli::cmd_trotter_scan(&resolved, taus.as_deref(), *duration)
        }
        Command::Tomography { gate } => cli::cmd_tomography(&resolved, gate),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
