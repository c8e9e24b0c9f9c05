//! Critical sets of maps φ: 𝕋^d → ℝ^{d−1}: distance of Dφ to low-rank
//! matrices, cube counts n(κ), box-counting dimensions of the critical set
//! and its image, and a binned weak-Sard diagnostic.

mod boxcount;
mod jet;
mod rank;
mod weak;

pub use boxcount::{
    box_count_curve, critical_cube_count, critical_points, dimension_fit, finest_level, image_dimension_estimate,
    BoxCountCurve, ImageDimension, BOUND_SLACK,
};
pub use jet::{jet_grid, orthogonality_residual, GridJet};
pub use rank::{distance_to_low_rank, AlphaSource, RankVarietyProbe};
pub use weak::{critical_value_measure, weak_sard_proxy, WeakSardCurve, WeakSardRow};
