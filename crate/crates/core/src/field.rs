use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, FftNd, Lattice, C64};

/// Samples of a real scalar or vector field on the grid {j/N}^d, held in
/// both real and spectral form. Components are stored one after another.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    dimension: usize,
    components: usize,
    resolution: usize,
    real: Vec<f64>,
    spectral: Vec<C64>,
}

/// Header data of a field, used when a field is described without samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldShape {
    pub dimension: usize,
    pub components: usize,
    pub resolution: usize,
}

fn check_shape(dimension: usize, resolution: usize, components: usize) -> Result<()> {
    if !(1..=3).contains(&dimension) {
        return Err(Error::Dimension {
            expected: "1, 2 or 3".into(),
            got: dimension,
        });
    }
    if resolution < 2 || !resolution.is_power_of_two() {
        return Err(Error::Shape(format!(
            "resolution must be a power of two ≥ 2, got {resolution}"
        )));
    }
    if components == 0 {
        return Err(Error::Shape("a field needs at least one component".into()));
    }
    Ok(())
}

impl GridField {
    pub fn from_real(
        dimension: usize,
        resolution: usize,
        components: usize,
        real: Vec<f64>,
    ) -> Result<Self> {
        check_shape(dimension, resolution, components)?;
        let lat = Lattice::new(dimension, resolution);
        if real.len() != lat.len() * components {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                lat.len() * components,
                real.len()
            )));
        }
        let fft = FftNd::new(dimension, resolution);
        let mut spectral = Vec::with_capacity(real.len());
        for chunk in real.chunks_exact(lat.len()) {
            spectral.extend(fft.forward_real(chunk));
        }
        Ok(GridField {
            dimension,
            components,
            resolution,
            real,
            spectral,
        })
    }

    /// Builds the field from coefficients. The conjugate-symmetric part is
    /// kept, which is exactly what the real part of the inverse sees.
    pub fn from_spectral(
        dimension: usize,
        resolution: usize,
        components: usize,
        mut spectral: Vec<C64>,
    ) -> Result<Self> {
        check_shape(dimension, resolution, components)?;
        let lat = Lattice::new(dimension, resolution);
        if spectral.len() != lat.len() * components {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
                lat.len() * components,
                spectral.len()
            )));
        }
        let fft = FftNd::new(dimension, resolution);
        let mut real = Vec::with_capacity(spectral.len());
        for chunk in spectral.chunks_exact_mut(lat.len()) {
            spectral::symmetrize(lat, chunk);
            real.extend(fft.inverse_real(chunk));
        }
        Ok(GridField {
            dimension,
            components,
            resolution,
            real,
            spectral,
        })
    }

    /// Samples `f(x, out)` at every grid point; `out` has one slot per component.
    pub fn from_fn(
        dimension: usize,
        resolution: usize,
        components: usize,
        f: impl Fn(&[f64], &mut [f64]),
    ) -> Result<Self> {
        check_shape(dimension, resolution, components)?;
        let lat = Lattice::new(dimension, resolution);
        let len = lat.len();
        let mut real = vec![0.0; len * components];
        let mut out = vec![0.0; components];
        for flat in 0..len {
            let x = lat.point(flat);
            f(&x[..dimension], &mut out);
            for c in 0..components {
                real[c * len + flat] = out[c];
            }
        }
        Self::from_real(dimension, resolution, components, real)
    }

    pub fn zeros(dimension: usize, resolution: usize, components: usize) -> Result<Self> {
        check_shape(dimension, resolution, components)?;
        let len = Lattice::new(dimension, resolution).len() * components;
        Ok(GridField {
            dimension,
            components,
            resolution,
            real: vec![0.0; len],
            spectral: vec![C64::new(0.0, 0.0); len],
        })
    }

    /// Concatenates scalar fields into one multi-component field.
    pub fn stack(parts: &[GridField]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Input("cannot stack zero fields".into()))?;
        let mut real = Vec::new();
        let mut spectral = Vec::new();
        let mut components = 0;
        for p in parts {
            if p.dimension != first.dimension || p.resolution != first.resolution {
                return Err(Error::Shape("stacked fields must share dimension and resolution".into()));
            }
            real.extend_from_slice(&p.real);
            spectral.extend_from_slice(&p.spectral);
            components += p.components;
        }
        Ok(GridField {
            dimension: first.dimension,
            components,
            resolution: first.resolution,
            real,
            spectral,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn shape(&self) -> FieldShape {
        FieldShape {
            dimension: self.dimension,
            components: self.components,
            resolution: self.resolution,
        }
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.dimension, self.resolution)
    }

    /// Number of grid points (per component).
    pub fn points(&self) -> usize {
        self.lattice().len()
    }

    pub fn real(&self) -> &[f64] {
        &self.real
    }

    pub fn spectral(&self) -> &[C64] {
        &self.spectral
    }

    pub fn real_component(&self, c: usize) -> &[f64] {
        let len = self.points();
        &self.real[c * len..(c + 1) * len]
    }

    pub fn spectral_component(&self, c: usize) -> &[C64] {
        let len = self.points();
        &self.spectral[c * len..(c + 1) * len]
    }

    pub fn component(&self, c: usize) -> Result<GridField> {
        if c >= self.components {
            return Err(Error::Shape(format!(
                "component {c} out of range for a {}-component field",
                self.components
            )));
        }
        Ok(GridField {
            dimension: self.dimension,
            components: 1,
            resolution: self.resolution,
            real: self.real_component(c).to_vec(),
            spectral: self.spectral_component(c).to_vec(),
        })
    }

    /// Pointwise Euclidean norm of the component vector.
    pub fn magnitude(&self) -> Vec<f64> {
        let len = self.points();
        (0..len)
            .map(|i| {
                (0..self.components)
                    .map(|c| self.real[c * len + i].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// max_x |f(x)| with |·| the Euclidean norm over components.
    pub fn max_abs(&self) -> f64 {
        self.magnitude().into_iter().fold(0.0, f64::max)
    }

    /// Grid mean of component `c`; the k = 0 coefficient.
    pub fn mean(&self, c: usize) -> f64 {
        self.spectral_component(c)[0].re
    }

    /// Grid mean of |f|², computed by Parseval.
    pub fn mean_square(&self) -> f64 {
        spectral::energy(&self.spectral)
    }

    pub fn scaled(&self, a: f64) -> GridField {
        GridField {
            dimension: self.dimension,
            components: self.components,
            resolution: self.resolution,
            real: self.real.iter().map(|x| a * x).collect(),
            spectral: self.spectral.iter().map(|z| z * a).collect(),
        }
    }

    pub fn negated(&self) -> GridField {
        self.scaled(-1.0)
    }

    /// Same field at another resolution by spectral injection or truncation.
    pub fn resampled(&self, resolution: usize) -> Result<GridField> {
        if resolution == self.resolution {
            return Ok(self.clone());
        }
        check_shape(self.dimension, resolution, self.components)?;
        let lat = self.lattice();
        let mut spec = Vec::new();
        for c in 0..self.components {
            spec.extend(spectral::resample(lat, self.spectral_component(c), resolution));
        }
        GridField::from_spectral(self.dimension, resolution, self.components, spec)
    }

    /// L² distance on the torus, after bringing both to the finer grid.
    pub fn l2_distance(&self, other: &GridField) -> Result<f64> {
        if self.dimension != other.dimension || self.components != other.components {
            return Err(Error::Shape("fields differ in dimension or components".into()));
        }
        let n = self.resolution.max(other.resolution);
        let a = self.resampled(n)?;
        let b = other.resampled(n)?;
        Ok(a.spectral
            .iter()
            .zip(&b.spectral)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Largest imaginary part of the inverse transform of the stored
    /// coefficients, relative to the largest modulus.
    pub fn imaginary_residual(&self) -> f64 {
        let fft = FftNd::new(self.dimension, self.resolution);
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for c in 0..self.components {
            let mut buf = self.spectral_component(c).to_vec();
            fft.inverse(&mut buf);
            for z in buf {
                worst = worst.max(z.im.abs());
                scale = scale.max(z.norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Spectral partial derivative of every component.
    pub fn derivative(&self, axis: usize) -> Result<GridField> {
        if axis >= self.dimension {
            return Err(Error::Shape(format!(
                "axis {axis} out of range in dimension {}",
                self.dimension
            )));
        }
        let lat = self.lattice();
        let mut spec = Vec::with_capacity(self.spectral.len());
        for c in 0..self.components {
            spec.extend(spectral::derivative(lat, self.spectral_component(c), axis));
        }
        GridField::from_spectral(self.dimension, self.resolution, self.components, spec)
    }

    /// Gradient of a scalar field as a d-component field.
    pub fn gradient(&self) -> Result<GridField> {
        if self.components != 1 {
            return Err(Error::Shape("gradient needs a scalar field".into()));
        }
        let parts: Vec<GridField> = (0..self.dimension)
            .map(|a| self.derivative(a))
            .collect::<Result<_>>()?;
        GridField::stack(&parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TWO_PI;

    #[test]
    fn real_and_spectral_agree() {
        let f = GridField::from_fn(2, 16, 2, |x, out| {
            out[0] = (TWO_PI * x[0]).cos();
            out[1] = (TWO_PI * (x[0] - 2.0 * x[1])).sin() + 0.25;
        })
        .unwrap();
        let g = GridField::from_spectral(2, 16, 2, f.spectral().to_vec()).unwrap();
        for (a, b) in f.real().iter().zip(g.real()) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!((f.mean(1) - 0.25).abs() < 1e-15);
        assert!((f.mean_square() - (0.5 + 0.5 + 0.0625)).abs() < 1e-12);
        assert!(f.imaginary_residual() < 1e-14);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(GridField::zeros(4, 8, 1).is_err());
        assert!(GridField::zeros(2, 12, 1).is_err());
        assert!(GridField::from_real(2, 8, 1, vec![0.0; 10]).is_err());
    }

    #[test]
    fn l2_distance_across_resolutions() {
        let a = GridField::from_fn(2, 8, 1, |x, o| o[0] = (TWO_PI * x[1]).sin()).unwrap();
        let b = GridField::from_fn(2, 32, 1, |x, o| o[0] = 0.5 * (TWO_PI * x[1]).sin()).unwrap();
        // ‖½ sin‖ = ½·√½
        assert!((a.l2_distance(&b).unwrap() - 0.5 * 0.5f64.sqrt()).abs() < 1e-13);
    }
}
