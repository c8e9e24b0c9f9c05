//! Numerics for passive scalars on the flat torus.
//!
//! The crate samples divergence-free velocity fields, integrates
//! advection–diffusion with a pseudo-spectral integrating-factor scheme,
//! and measures dissipation, Yaglom averages, structure functions, pair
//! dispersion and critical-set dimensions.

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod fields;
pub mod io;
pub mod lagrangian;
pub mod sard;
pub mod solver;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use field::GridField;
