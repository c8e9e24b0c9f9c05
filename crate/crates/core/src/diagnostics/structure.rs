use serde::{Deserialize, Serialize};

use crate::diagnostics::yaglom::{sphere_directions, DEFAULT_DIRECTIONS};
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::spectral::TWO_PI;
use crate::stats::linear_fit;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureCurve {
    pub radii: Vec<f64>,
    pub s2: Vec<f64>,
    /// Half the log-log slope of S₂ against r.
    pub exponent: f64,
    pub exponent_se: f64,
}

impl StructureCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,S2\n");
        for (r, v) in self.radii.iter().zip(&self.s2) {
            s.push_str(&format!("{r},{v}\n"));
        }
        s
    }
}

fn check_dyadic(radii: &[f64]) -> Result<()> {
    if radii.len() < 4 {
        return Err(Error::Input(format!("need at least 4 radii, got {}", radii.len())));
    }
    for &r in radii {
        if !(r > 0.0 && r < 0.5) {
            return Err(Error::Domain(format!("radius must lie in (0, 1/2), got {r}")));
        }
    }
    for w in radii.windows(2) {
        let q = w[1] / w[0];
        if !((q - 2.0).abs() < 1e-9 || (q - 0.5).abs() < 1e-9) {
            return Err(Error::Input(format!("radii must be dyadic: {} then {}", w[0], w[1])));
        }
    }
    Ok(())
}

/// Direction-averaged S₂(r) = avg_j ∫|θ(x + rξ_j) − θ(x)|² dx, by Parseval:
/// Σ_k |θ̂_k|² · 2(1 − cos 2πk·rξ_j).
pub fn structure_function(theta: &GridField, radii: &[f64], directions: usize) -> Result<Vec<f64>> {
    if theta.components() != 1 {
        return Err(Error::Shape("structure functions need a scalar field".into()));
    }
    let d = theta.dimension();
    let dirs = sphere_directions(d, directions)?;
    let lat = theta.lattice();
    let modes: Vec<([f64; 3], f64)> = theta
        .spectral()
        .iter()
        .enumerate()
        .filter(|(f, z)| *f != 0 && z.norm_sqr() > 0.0)
        .map(|(f, z)| {
            let k = lat.wavevector(f);
            ([k[0] as f64, k[1] as f64, k[2] as f64], z.norm_sqr())
        })
        .collect();
    Ok(radii
        .iter()
        .map(|&r| {
            let mut total = 0.0;
            for xi in &dirs {
                for (k, e) in &modes {
                    let dot: f64 = (0..d).map(|a| k[a] * xi[a]).sum();
                    total += e * 2.0 * (1.0 - (TWO_PI * dot * r).cos());
                }
            }
            total / dirs.len() as f64
        })
        .collect())
}

pub fn structure_function_exponent(theta: &GridField, radii: &[f64]) -> Result<StructureCurve> {
    structure_function_exponent_with(theta, radii, DEFAULT_DIRECTIONS)
}

pub fn structure_function_exponent_with(
    theta: &GridField,
    radii: &[f64],
    directions: usize,
) -> Result<StructureCurve> {
    check_dyadic(radii)?;
    let s2 = structure_function(theta, radii, directions)?;
    if s2.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::EstimatorUndefined(
            "structure function vanishes; the field is constant".into(),
        ));
    }
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = s2.iter().map(|s| s.ln()).collect();
    let fit = linear_fit(&lx, &ly)
        .ok_or_else(|| Error::EstimatorUndefined("degenerate radii for the fit".into()))?;
    Ok(StructureCurve {
        radii: radii.to_vec(),
        s2,
        exponent: fit.slope / 2.0,
        exponent_se: fit.slope_se / 2.0,
    })
}
