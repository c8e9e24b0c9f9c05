use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::holder_estimate;
use crate::sard::jet::GridJet;

/// Frobenius distance from the row-major `rows`×`cols` matrix `m` to the
/// matrices of rank at most k: the root sum of squares of the singular
/// values beyond the k-th.
pub fn distance_to_low_rank(m: &[f64], rows: usize, cols: usize, k: usize) -> f64 {
    debug_assert_eq!(m.len(), rows * cols);
    if k >= rows.min(cols) {
        return 0.0;
    }
    let mat = DMatrix::from_row_slice(rows, cols, m);
    let mut s: Vec<f64> = mat.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s[k..].iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Where the Hölder exponent of Dφ comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSource {
    /// Fitted per realization by the increment estimator.
    Estimated,
    Fixed(f64),
}

impl Default for AlphaSource {
    fn default() -> Self {
        AlphaSource::Estimated
    }
}

/// Thresholding data for the rank ≤ k variety W and the Hölder modulus of Dφ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankVarietyProbe {
    pub dimension: usize,
    pub rank_bound: usize,
    /// Radius of the matrix ball B_N.
    pub radius_bound: f64,
    /// (d − k)(d − 1 − k).
    pub codimension: usize,
    pub holder_alpha: f64,
    pub holder_norm: f64,
}

impl RankVarietyProbe {
    pub fn new(dimension: usize, rank_bound: usize, holder_alpha: f64, holder_norm: f64, radius_bound: f64) -> Result<Self> {
        if !(2..=3).contains(&dimension) {
            return Err(Error::Dimension {
                expected: "2 or 3".into(),
                got: dimension,
            });
        }
        if rank_bound + 2 > dimension {
            return Err(Error::Input(format!(
                "rank bound {rank_bound} must lie in 0..={} in dimension {dimension}",
                dimension - 2
            )));
        }
        if !(holder_alpha > 0.0 && holder_alpha <= 1.0) {
            return Err(Error::Input(format!("Hölder exponent {holder_alpha} outside (0, 1]")));
        }
        if !(holder_norm >= 0.0 && radius_bound >= 0.0) {
            return Err(Error::Input("Hölder norm and ball radius must be nonnegative".into()));
        }
        Ok(RankVarietyProbe {
            dimension,
            rank_bound,
            radius_bound,
            codimension: (dimension - rank_bound) * (dimension - 1 - rank_bound),
            holder_alpha,
            holder_norm,
        })
    }

    /// Probe whose Hölder data are measured on the jet. The norm is the
    /// empirical seminorm of Dφ at the chosen exponent and the ball radius
    /// is twice the largest grid Jacobian, so W ∩ B_N contains every
    /// nearest low-rank truncation.
    pub fn from_jet(jet: &GridJet, rank_bound: usize, alpha: AlphaSource) -> Result<Self> {
        let holder_alpha = match alpha {
            AlphaSource::Fixed(a) => a,
            AlphaSource::Estimated => {
                let fit = holder_estimate(jet.phi(), 1)?;
                if fit.alpha <= 0.0 {
                    return Err(Error::EstimatorUndefined(
                        "fitted Hölder exponent of Dφ is 0".into(),
                    ));
                }
                fit.alpha
            }
        };
        if !(holder_alpha > 0.0 && holder_alpha <= 1.0) {
            return Err(Error::Input(format!("Hölder exponent {holder_alpha} outside (0, 1]")));
        }
        Self::new(
            jet.dimension(),
            rank_bound,
            holder_alpha,
            jet.holder_seminorm(holder_alpha),
            2.0 * jet.max_jacobian_norm(),
        )
    }

    /// N_reg·(√d·2^{−level−1})^α: how far Dφ at a cube centre may sit from
    /// W when the cube still meets the critical set.
    pub fn threshold(&self, level: u32) -> f64 {
        let half_diag = (self.dimension as f64).sqrt() * 0.5f64.powi(level as i32 + 1);
        self.holder_norm * half_diag.powf(self.holder_alpha)
    }

    /// d − c₀·α.
    pub fn domain_bound(&self) -> f64 {
        self.dimension as f64 - self.codimension as f64 * self.holder_alpha
    }

    /// (β + α·k)/(1 + α) for a critical set of dimension β.
    pub fn image_bound(&self, domain_dimension: f64) -> f64 {
        (domain_dimension + self.holder_alpha * self.rank_bound as f64) / (1.0 + self.holder_alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codimension_table() {
        let p = RankVarietyProbe::new(3, 0, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(p.codimension, 6);
        let p = RankVarietyProbe::new(3, 1, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(p.codimension, 2);
        let p = RankVarietyProbe::new(2, 0, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(p.codimension, 2);
        assert!(RankVarietyProbe::new(2, 1, 0.5, 1.0, 1.0).is_err());
        assert!(RankVarietyProbe::new(3, 0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn diagonal_distances() {
        let m = [3.0, 0.0, 0.0, 0.0, 4.0, 0.0];
        assert!((distance_to_low_rank(&m, 2, 3, 1) - 3.0).abs() < 1e-14);
        assert!((distance_to_low_rank(&m, 2, 3, 0) - 5.0).abs() < 1e-14);
        assert_eq!(distance_to_low_rank(&[0.0; 6], 2, 3, 0), 0.0);
        assert_eq!(distance_to_low_rank(&m, 2, 3, 2), 0.0);
    }
}
