use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::stats::linear_fit;

/// Log-log fit of the largest increment against the shift length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    /// Fitted exponent clamped to [0, 1].
    pub alpha: f64,
    /// Unclamped slope.
    pub raw_slope: f64,
    /// Prefactor C in max increment ≈ C·r^α.
    pub constant: f64,
    pub radii: Vec<f64>,
    pub max_increments: Vec<f64>,
}

/// Estimates the Hölder exponent of f (order 0) or of Df (order 1) from the
/// largest grid increment at dyadic shifts r ∈ [4/N, 1/8] along the axes.
pub fn holder_estimate(f: &GridField, derivative_order: usize) -> Result<HolderFit> {
    let n = f.resolution();
    if n < 64 {
        return Err(Error::Input(format!("holder_estimate needs N ≥ 64, got {n}")));
    }
    let stack = match derivative_order {
        0 => f.clone(),
        1 => {
            let parts: Vec<GridField> = (0..f.dimension())
                .map(|a| f.derivative(a))
                .collect::<Result<_>>()?;
            GridField::stack(&parts)?
        }
        o => return Err(Error::Input(format!("derivative order must be 0 or 1, got {o}"))),
    };
    let lat = stack.lattice();
    let len = lat.len();
    let comps = stack.components();
    let vals = stack.real();
    let scale = stack.max_abs();

    let mut radii = Vec::new();
    let mut incs = Vec::new();
    let mut shift = 4;
    while shift * 8 <= n {
        let mut worst: f64 = 0.0;
        for axis in 0..lat.dim {
            for flat in 0..len {
                let mut c = lat.coords(flat);
                c[axis] = (c[axis] + shift) % n;
                let other = lat.flat(&c);
                let sq: f64 = (0..comps)
                    .map(|k| (vals[k * len + other] - vals[k * len + flat]).powi(2))
                    .sum();
                worst = worst.max(sq);
            }
        }
        radii.push(shift as f64 / n as f64);
        incs.push(worst.sqrt());
        shift *= 2;
    }
    if incs.iter().any(|&m| m <= 1e-13 * scale.max(f64::MIN_POSITIVE)) || scale == 0.0 {
        return Err(Error::EstimatorUndefined(
            "increments vanish; the field is constant at the probed scales".into(),
        ));
    }
    let lx: Vec<f64> = radii.iter().map(|r: &f64| r.ln()).collect();
    let ly: Vec<f64> = incs.iter().map(|m: &f64| m.ln()).collect();
    let fit = linear_fit(&lx, &ly)
        .ok_or_else(|| Error::EstimatorUndefined("fewer than two usable radii".into()))?;
    Ok(HolderFit {
        alpha: fit.slope.clamp(0.0, 1.0),
        raw_slope: fit.slope,
        constant: fit.intercept.exp(),
        radii,
        max_increments: incs,
    })
}
