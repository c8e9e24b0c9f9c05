//! Vanishing-diffusivity functionals: dissipation sweeps, Yaglom averages,
//! structure-function exponents and strong-convergence distances.

mod convergence;
mod structure;
mod sweep;
mod yaglom;

pub use convergence::strong_convergence_check;
pub use structure::{structure_function, structure_function_exponent, structure_function_exponent_with, StructureCurve};
pub use sweep::{
    band_resolution, classify_sweep, epsilon_sweep, minimal_resolution, plan_resolutions, summarize_sweep,
    ResolutionPolicy, SweepConfig, SweepResult, SweepRun, SweepVerdict, VerdictThresholds,
};
pub use yaglom::{
    sphere_directions, sphere_measure, yaglom_average, yaglom_bound, yaglom_curve, yaglom_ratio_curve, YaglomCurve,
    YaglomRatio, DEFAULT_DIRECTIONS,
};
