//! Random and deterministic divergence-free velocity fields on 𝕋² and 𝕋³.

mod covariance;
mod regularity;
mod spectrum;
mod synth;

pub use covariance::{analytic_covariance, pointwise_covariance_check, CovarianceCheck};
pub use regularity::{holder_estimate, HolderFit};
pub use spectrum::{decay_for_alpha, ModeSpec, SpectrumConfig, REGULARITY_MARGIN};
pub use synth::{
    divergence_residual, project_solenoidal, sample_clebsch_3d, sample_stream_2d,
    velocity_from_clebsch, velocity_from_stream, ClebschPotentials, ClebschVelocity, NamedField,
};
