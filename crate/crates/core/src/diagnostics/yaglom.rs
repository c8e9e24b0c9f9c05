use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::sweep::SweepRun;
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::spectral::{phase_shift, FftNd, C64};

pub const DEFAULT_DIRECTIONS: usize = 64;

/// Quasi-uniform unit directions: equally spaced angles in 2D, a Fibonacci
/// lattice on the sphere in 3D. Unused trailing entries are zero.
pub fn sphere_directions(dimension: usize, q: usize) -> Result<Vec<[f64; 3]>> {
    if q == 0 {
        return Err(Error::Input("need at least one direction".into()));
    }
    match dimension {
        2 => Ok((0..q)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / q as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect()),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            Ok((0..q)
                .map(|j| {
                    let z = 1.0 - (2 * j + 1) as f64 / q as f64;
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * j as f64;
                    [rho * phi.cos(), rho * phi.sin(), z]
                })
                .collect())
        }
        d => Err(Error::Dimension {
            expected: "2 or 3".into(),
            got: d,
        }),
    }
}

/// Surface measure of the unit sphere S^{d−1}.
pub fn sphere_measure(dimension: usize) -> f64 {
    match dimension {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => f64::NAN,
    }
}

fn check_pair(theta: &GridField, v: &GridField) -> Result<()> {
    if theta.components() != 1 {
        return Err(Error::Shape("theta must be a scalar field".into()));
    }
    if v.components() != v.dimension() {
        return Err(Error::Shape("v must be a vector field".into()));
    }
    if theta.dimension() != v.dimension() || theta.resolution() != v.resolution() {
        return Err(Error::Shape("theta and v must share dimension and resolution".into()));
    }
    if !(2..=3).contains(&theta.dimension()) {
        return Err(Error::Dimension {
            expected: "2 or 3".into(),
            got: theta.dimension(),
        });
    }
    Ok(())
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 0.5) {
        return Err(Error::Domain(format!("radius must lie in (0, 1/2), got {r}")));
    }
    Ok(())
}

fn increment(lat: crate::spectral::Lattice, spec: &[C64], shift: &[f64]) -> Vec<C64> {
    let mut out = phase_shift(lat, spec, shift);
    for (o, z) in out.iter_mut().zip(spec) {
        *o -= z;
    }
    out
}

/// Pointwise S(x) = Σ_j w ξ_j·δv(rξ_j; x) |δθ(rξ_j; x)|² with w = |S^{d−1}|/Q.
fn pointwise_s(theta: &GridField, v: &GridField, r: f64, dirs: &[[f64; 3]]) -> Vec<f64> {
    let d = theta.dimension();
    let lat = theta.lattice();
    let len = lat.len();
    let fft = FftNd::new(d, lat.n);
    let w = sphere_measure(d) / dirs.len() as f64;

    let per_direction = |xi: &[f64; 3]| -> Vec<f64> {
        let shift: Vec<f64> = xi[..d].iter().map(|c| c * r).collect();
        let dth = increment(lat, theta.spectral(), &shift);
        let dv: Vec<Vec<C64>> = (0..d).map(|c| increment(lat, v.spectral_component(c), &shift)).collect();
        // Separate real transforms: packing two fields into one complex
        // transform leaks round-off between them, and a vanishing increment
        // must give exactly zero.
        let th = fft.inverse_real(&dth);
        let dv: Vec<Vec<f64>> = dv.iter().map(|c| fft.inverse_real(c)).collect();
        (0..len)
            .map(|i| {
                let proj: f64 = (0..d).map(|a| xi[a] * dv[a][i]).sum();
                w * proj * th[i] * th[i]
            })
            .collect()
    };

    // Fixed-size chunks summed in a fixed order keep the result independent
    // of the thread count.
    let partials: Vec<Vec<f64>> = dirs
        .par_chunks(8)
        .map(|chunk| {
            let mut acc = vec![0.0; len];
            for xi in chunk {
                for (a, s) in acc.iter_mut().zip(per_direction(xi)) {
                    *a += s;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; len];
    for p in partials {
        for (t, s) in total.iter_mut().zip(p) {
            *t += s;
        }
    }
    total
}

/// Space average of S(θ, v, r), with the pointwise field.
pub fn yaglom_average(theta: &GridField, v: &GridField, r: f64, directions: usize) -> Result<(f64, GridField)> {
    check_pair(theta, v)?;
    check_radius(r)?;
    let dirs = sphere_directions(theta.dimension(), directions)?;
    let s = pointwise_s(theta, v, r, &dirs);
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    let field = GridField::from_real(theta.dimension(), theta.resolution(), 1, s)?;
    Ok((mean, field))
}

/// The a priori bound |S^{d−1}|·max|δv|·max|δθ|² over the quadrature directions.
pub fn yaglom_bound(theta: &GridField, v: &GridField, r: f64, directions: usize) -> Result<f64> {
    check_pair(theta, v)?;
    check_radius(r)?;
    let d = theta.dimension();
    let lat = theta.lattice();
    let fft = FftNd::new(d, lat.n);
    let mut dv_max: f64 = 0.0;
    let mut dth_max: f64 = 0.0;
    for xi in sphere_directions(d, directions)? {
        let shift: Vec<f64> = xi[..d].iter().map(|c| c * r).collect();
        let th = fft.inverse_real(&increment(lat, theta.spectral(), &shift));
        dth_max = th.iter().fold(dth_max, |m, x| m.max(x.abs()));
        let comps: Vec<Vec<f64>> = (0..d)
            .map(|c| fft.inverse_real(&increment(lat, v.spectral_component(c), &shift)))
            .collect();
        for i in 0..lat.len() {
            let m2: f64 = comps.iter().map(|c| c[i] * c[i]).sum();
            dv_max = dv_max.max(m2.sqrt());
        }
    }
    Ok(sphere_measure(d) * dv_max * dth_max * dth_max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YaglomCurve {
    pub radii: Vec<f64>,
    pub mean_s: Vec<f64>,
    pub directions: usize,
    #[serde(skip)]
    pub pointwise: Option<Vec<GridField>>,
}

impl YaglomCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,mean_S,mean_S_over_r\n");
        for (r, m) in self.radii.iter().zip(&self.mean_s) {
            s.push_str(&format!("{},{},{}\n", r, m, m / r));
        }
        s
    }
}

pub fn yaglom_curve(
    theta: &GridField,
    v: &GridField,
    radii: &[f64],
    directions: usize,
    keep_pointwise: bool,
) -> Result<YaglomCurve> {
    let mut mean_s = Vec::with_capacity(radii.len());
    let mut fields = Vec::new();
    for &r in radii {
        let (m, f) = yaglom_average(theta, v, r, directions)?;
        mean_s.push(m);
        if keep_pointwise {
            fields.push(f);
        }
    }
    Ok(YaglomCurve {
        radii: radii.to_vec(),
        mean_s,
        directions,
        pointwise: keep_pointwise.then_some(fields),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YaglomRatio {
    pub epsilons: Vec<f64>,
    pub mean_s: Vec<f64>,
    /// mean_S(θ_ε, v, ε)/ε.
    pub ratio: Vec<f64>,
    /// |ratio| at the smallest ε over |ratio| at the largest.
    pub decrease_factor: f64,
}

impl YaglomRatio {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,mean_S,mean_S_over_r\n");
        for i in 0..self.epsilons.len() {
            s.push_str(&format!("{},{},{}\n", self.epsilons[i], self.mean_s[i], self.ratio[i]));
        }
        s
    }
}

/// Evaluates S(θ_ε, v, ε)/ε on the final state of every run.
pub fn yaglom_ratio_curve(runs: &[SweepRun], v: &GridField, directions: usize) -> Result<YaglomRatio> {
    if runs.is_empty() {
        return Err(Error::Input("no sweep runs".into()));
    }
    let rows = runs
        .par_iter()
        .map(|run| {
            let vn = v.resampled(run.resolution)?;
            let (m, _) = yaglom_average(&run.state.theta, &vn, run.epsilon, directions)?;
            Ok((run.epsilon, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let epsilons: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mean_s: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let ratio: Vec<f64> = rows.iter().map(|(e, m)| m / e).collect();
    let first = ratio[0].abs();
    let last = ratio[ratio.len() - 1].abs();
    let decrease_factor = if first == 0.0 { 0.0 } else { last / first };
    Ok(YaglomRatio {
        epsilons,
        mean_s,
        ratio,
        decrease_factor,
    })
}
