use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::spectrum::SpectrumConfig;
use crate::error::{Error, Result};
use crate::spectral::TWO_PI;

/// Substream reserved for Monte Carlo cross-validation draws.
const STREAM_COVARIANCE_MC: u64 = 0x4d43;

/// Pointwise law of the random velocity (d = 2) or of vec Dφ (d = 3) at a
/// point: analytic covariance, its smallest eigenvalue, and a Monte Carlo
/// estimate with per-entry standard errors.
#[derive(Clone, Debug)]
pub struct CovarianceCheck {
    pub analytic: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub monte_carlo: DMatrix<f64>,
    pub standard_error: DMatrix<f64>,
    /// Largest |MC − analytic| / standard error over entries with nonzero error.
    pub max_z_score: f64,
    pub samples: usize,
}

fn observable_len(dimension: usize) -> usize {
    if dimension == 2 {
        2
    } else {
        6
    }
}

/// Random observable at `x` for one draw: v(x) in 2D, (∇φ₁, ∇φ₂)(x) in 3D.
fn observe(spec: &SpectrumConfig, rng: &mut rand_chacha::ChaCha8Rng, x: &[f64; 3], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let potentials = if spec.dimension == 2 { 1 } else { 2 };
    for p in 0..potentials {
        for m in spec.draw(rng) {
            let phase: f64 = TWO_PI * (0..3).map(|a| m.k[a] as f64 * x[a]).sum::<f64>();
            // ∇ 2Re(c e^{iθ}) = −4π k Im(c e^{iθ})
            let s = -2.0 * TWO_PI * (m.coefficient * num_complex::Complex64::from_polar(1.0, phase)).im;
            if spec.dimension == 2 {
                out[0] += s * m.k[1] as f64;
                out[1] -= s * m.k[0] as f64;
            } else {
                for a in 0..3 {
                    out[3 * p + a] += s * m.k[a] as f64;
                }
            }
        }
    }
}

pub fn analytic_covariance(spec: &SpectrumConfig) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let d = spec.dimension;
    let len = observable_len(d);
    let mut c = DMatrix::zeros(len, len);
    let scale = 2.0 * TWO_PI * TWO_PI;
    for (k, _, sd) in spec.retained_modes() {
        let w = scale * sd * sd;
        if d == 2 {
            let kp = [k[1] as f64, -(k[0] as f64)];
            for i in 0..2 {
                for j in 0..2 {
                    c[(i, j)] += w * kp[i] * kp[j];
                }
            }
        } else {
            for block in 0..2 {
                for i in 0..3 {
                    for j in 0..3 {
                        c[(3 * block + i, 3 * block + j)] += w * (k[i] * k[j]) as f64;
                    }
                }
            }
        }
    }
    Ok(c)
}

pub fn pointwise_covariance_check(
    spec: &SpectrumConfig,
    x: &[f64],
    samples: usize,
) -> Result<CovarianceCheck> {
    spec.validate()?;
    if samples < 100 {
        return Err(Error::Input(format!("need at least 100 samples, got {samples}")));
    }
    if x.len() != spec.dimension {
        return Err(Error::Shape(format!(
            "point has {} coordinates in dimension {}",
            x.len(),
            spec.dimension
        )));
    }
    let mut xw = [0.0; 3];
    for (a, &xa) in x.iter().enumerate() {
        xw[a] = xa.rem_euclid(1.0);
    }
    let analytic = analytic_covariance(spec)?;
    let len = analytic.nrows();
    let min_eigenvalue = SymmetricEigen::new(analytic.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);

    let mut rng = spec.rng(STREAM_COVARIANCE_MC);
    let mut obs = vec![0.0; len];
    let mut sum = DVector::zeros(len);
    let mut outer = DMatrix::zeros(len, len);
    for _ in 0..samples {
        observe(spec, &mut rng, &xw, &mut obs);
        let v = DVector::from_column_slice(&obs);
        sum += &v;
        outer += &v * v.transpose();
    }
    let n = samples as f64;
    let mean = sum / n;
    let monte_carlo = (outer - &mean * mean.transpose() * n) / (n - 1.0);

    let mut standard_error = DMatrix::zeros(len, len);
    let mut max_z_score: f64 = 0.0;
    for i in 0..len {
        for j in 0..len {
            let se = ((analytic[(i, i)] * analytic[(j, j)] + analytic[(i, j)].powi(2)) / n).sqrt();
            standard_error[(i, j)] = se;
            if se > 0.0 {
                max_z_score = max_z_score.max((monte_carlo[(i, j)] - analytic[(i, j)]).abs() / se);
            }
        }
    }
    Ok(CovarianceCheck {
        analytic,
        min_eigenvalue: min_eigenvalue.max(0.0),
        monte_carlo,
        standard_error,
        max_z_score,
        samples,
    })
}
