//! Pulse-level simulator and gate-calibration toolkit for a superconducting
//! hybrid system: a flux-tunable transmon and a parity-protected qubit (PPQ)
//! coupled through a resonator.
//!
//! The crate builds the device Hamiltonian from circuit parameters
//! ([`device`]), synthesizes microwave drive signals ([`pulses`]), propagates
//! the driven 64-dimensional system with second-order Suzuki-Trotter steps
//! ([`evolve`]), scores gates against ideal targets ([`metrics`]) and
//! calibrates pulse parameters with Nelder-Mead ([`optimize`]). The `tppq`
//! binary wires these together behind a config file; see [`cli`].
//!
//! Units: ħ = 1, energies and angular frequencies in rad/ns, time in ns.
//! Config files and reports quote linear frequencies in GHz (ω = 2π·f).

pub mod cli;
pub mod config;
pub mod device;
pub mod evolve;
pub mod linalg;
pub mod metrics;
pub mod optimize;
pub mod pulses;
pub mod rng;

pub use linalg::{ComplexMatrix, EigenDecomposition};
