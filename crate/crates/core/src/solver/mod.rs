//! Pseudo-spectral advection–diffusion solver with dissipation bookkeeping.

mod config;
mod initial;
mod integrate;
mod renorm;

pub use config::{SolverConfig, TimeStep, DEFAULT_LEDGER_SAMPLES};
pub use initial::{initialize, truncate_state, InitialData, InitialKind, ScalarState, SpectralEntry};
pub use integrate::{solve, solve_trajectory, step, DissipationLedger, Solution};
pub use renorm::{energy_balance_residual, renormalization_defect, Beta};
