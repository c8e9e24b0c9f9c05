//! Stochastic particle trajectories dX = v(X) dt + √(2ε) dB: ensembles,
//! pair dispersion and the Feynman–Kac cross-check of the solver.

mod dispersion;
mod ensemble;
mod feynman_kac;
mod interp;

pub use dispersion::{
    dispersion_curve, pair_dispersion, pair_grid_positions, richardson_sweep, richardson_verdict, torus_distance_sq,
    DispersionCurve, PairStat, RichardsonConfig, RichardsonData, RichardsonReport, RichardsonVerdict,
};
pub use ensemble::{evolve_ensemble, NoiseMode, ParticleEnsemble, SdeConfig};
pub use feynman_kac::{feynman_kac_check, FeynmanKacReport, FeynmanKacRow};
pub use interp::{HermiteInterpolator, SpectralEvaluator};
