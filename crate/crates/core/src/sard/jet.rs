use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::sard::rank::distance_to_low_rank;

/// A map φ: 𝕋^d → ℝ^{d−1} sampled on the grid together with its Jacobian.
#[derive(Clone, Debug, PartialEq)]
pub struct GridJet {
    phi: GridField,
    /// Row-major (d−1)×d blocks, one per grid point.
    jacobian: Vec<f64>,
}

/// Spectral Jacobian of a (d−1)-component field on 𝕋^d.
pub fn jet_grid(phi: &GridField) -> Result<GridJet> {
    let d = phi.dimension();
    if !(2..=3).contains(&d) {
        return Err(Error::Dimension {
            expected: "2 or 3".into(),
            got: d,
        });
    }
    if phi.components() != d - 1 {
        return Err(Error::Shape(format!(
            "a map to ℝ^{} needs {} components, got {}",
            d - 1,
            d - 1,
            phi.components()
        )));
    }
    let len = phi.points();
    let rows = d - 1;
    let mut jacobian = vec![0.0; len * rows * d];
    for a in 0..d {
        let da = phi.derivative(a)?;
        for r in 0..rows {
            let col = da.real_component(r);
            for (p, &g) in col.iter().enumerate() {
                jacobian[p * rows * d + r * d + a] = g;
            }
        }
    }
    Ok(GridJet {
        phi: phi.clone(),
        jacobian,
    })
}

impl GridJet {
    pub fn dimension(&self) -> usize {
        self.phi.dimension()
    }

    pub fn resolution(&self) -> usize {
        self.phi.resolution()
    }

    /// Number of rows d − 1 of each Jacobian.
    pub fn range_dimension(&self) -> usize {
        self.phi.components()
    }

    pub fn phi(&self) -> &GridField {
        &self.phi
    }

    pub fn points(&self) -> usize {
        self.phi.points()
    }

    /// Jacobian at grid point `flat`, row-major.
    pub fn jacobian_at(&self, flat: usize) -> &[f64] {
        let block = self.range_dimension() * self.dimension();
        &self.jacobian[flat * block..(flat + 1) * block]
    }

    /// φ(x) at grid point `flat`.
    pub fn value_at(&self, flat: usize) -> Vec<f64> {
        (0..self.range_dimension())
            .map(|r| self.phi.real_component(r)[flat])
            .collect()
    }

    /// Largest Frobenius norm of Dφ over the grid.
    pub fn max_jacobian_norm(&self) -> f64 {
        let block = self.range_dimension() * self.dimension();
        self.jacobian
            .chunks(block)
            .map(|m| m.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Distance of Dφ(x) to the rank ≤ k matrices at every grid point.
    pub fn low_rank_distances(&self, k: usize) -> Vec<f64> {
        let rows = self.range_dimension();
        let cols = self.dimension();
        self.jacobian
            .par_chunks(rows * cols)
            .map(|m| distance_to_low_rank(m, rows, cols, k))
            .collect()
    }

    /// Empirical C^{0,α} seminorm of Dφ: the largest Frobenius increment
    /// over axis shifts r ∈ [4/N, 1/8], divided by r^α.
    pub fn holder_seminorm(&self, alpha: f64) -> f64 {
        let n = self.resolution();
        let lat = self.phi.lattice();
        let block = self.range_dimension() * self.dimension();
        let mut best: f64 = 0.0;
        let mut shift = 4;
        while shift * 8 <= n {
            let r = shift as f64 / n as f64;
            let worst = (0..lat.len())
                .into_par_iter()
                .map(|flat| {
                    let mut w: f64 = 0.0;
                    for axis in 0..lat.dim {
                        let mut c = lat.coords(flat);
                        c[axis] = (c[axis] + shift) % n;
                        let other = lat.flat(&c);
                        let a = &self.jacobian[flat * block..(flat + 1) * block];
                        let b = &self.jacobian[other * block..(other + 1) * block];
                        let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
                        w = w.max(sq);
                    }
                    w
                })
                .reduce(|| 0.0, f64::max);
            best = best.max(worst.sqrt() / r.powf(alpha));
            shift *= 2;
        }
        best
    }

    /// max over grid points and rows of |∇φ_r·v| / (max|∇φ_r|·max|v|).
    pub fn orthogonality_residual(&self, v: &GridField) -> Result<f64> {
        orthogonality_residual(self, v)
    }
}

/// max over grid points and rows k of |∇φ_k·v| normalized by
/// max|∇φ_k|·max|v|. Zero when either factor vanishes identically.
pub fn orthogonality_residual(jet: &GridJet, v: &GridField) -> Result<f64> {
    let d = jet.dimension();
    if v.dimension() != d || v.components() != d || v.resolution() != jet.resolution() {
        return Err(Error::Shape(format!(
            "velocity with shape {:?} does not match a jet in dimension {d} at N = {}",
            v.shape(),
            jet.resolution()
        )));
    }
    let vmax = v.max_abs();
    let len = jet.points();
    let mut worst: f64 = 0.0;
    for r in 0..jet.range_dimension() {
        let mut gmax: f64 = 0.0;
        let mut dot_max: f64 = 0.0;
        for p in 0..len {
            let row = &jet.jacobian_at(p)[r * d..(r + 1) * d];
            gmax = gmax.max(row.iter().map(|x| x * x).sum::<f64>().sqrt());
            let dot: f64 = (0..d).map(|a| row[a] * v.real_component(a)[p]).sum();
            dot_max = dot_max.max(dot.abs());
        }
        if gmax > 0.0 && vmax > 0.0 {
            worst = worst.max(dot_max / (gmax * vmax));
        }
    }
    Ok(worst)
}
