use num_complex::Complex64;

use super::spectrum::SpectrumConfig;
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::spectral::{self, FftNd, Lattice, C64, TWO_PI};

const STREAM_POTENTIAL: u64 = 0;
const STREAM_CLEBSCH_1: u64 = 1;
const STREAM_CLEBSCH_2: u64 = 2;

/// Two scalar potentials on 𝕋³ whose gradients span the velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct ClebschPotentials {
    phi1: GridField,
    phi2: GridField,
}

impl ClebschPotentials {
    pub fn new(phi1: GridField, phi2: GridField) -> Result<Self> {
        for p in [&phi1, &phi2] {
            if p.dimension() != 3 || p.components() != 1 {
                return Err(Error::Shape("Clebsch potentials must be scalar fields on 𝕋³".into()));
            }
        }
        if phi1.resolution() != phi2.resolution() {
            return Err(Error::Shape(format!(
                "potential resolutions differ: {} vs {}",
                phi1.resolution(),
                phi2.resolution()
            )));
        }
        Ok(ClebschPotentials { phi1, phi2 })
    }

    pub fn phi1(&self) -> &GridField {
        &self.phi1
    }

    pub fn phi2(&self) -> &GridField {
        &self.phi2
    }

    /// The pair as one two-component field.
    pub fn stack(&self) -> GridField {
        GridField::stack(&[self.phi1.clone(), self.phi2.clone()]).expect("shapes checked on construction")
    }
}

/// Velocity built from Clebsch potentials together with the divergence
/// residual measured before the solenoidal projection.
#[derive(Clone, Debug)]
pub struct ClebschVelocity {
    pub velocity: GridField,
    pub pre_projection_divergence: f64,
}

fn sample_scalar(spec: &SpectrumConfig, stream: u64) -> Result<GridField> {
    spec.validate()?;
    let lat = Lattice::new(spec.dimension, spec.resolution);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); lat.len()];
    let mut rng = spec.rng(stream);
    for m in spec.draw(&mut rng) {
        coeffs[lat.index_of(&m.k)] = m.coefficient;
        let neg = [-m.k[0], -m.k[1], -m.k[2]];
        coeffs[lat.index_of(&neg)] = m.coefficient.conj();
    }
    GridField::from_spectral(spec.dimension, spec.resolution, 1, coeffs)
}

/// Gaussian stream function on 𝕋².
pub fn sample_stream_2d(spec: &SpectrumConfig) -> Result<GridField> {
    if spec.dimension != 2 {
        return Err(Error::Dimension {
            expected: "2".into(),
            got: spec.dimension,
        });
    }
    sample_scalar(spec, STREAM_POTENTIAL)
}

/// Independent Gaussian potentials on 𝕋³ drawn from distinct substreams.
pub fn sample_clebsch_3d(spec: &SpectrumConfig) -> Result<ClebschPotentials> {
    if spec.dimension != 3 {
        return Err(Error::Dimension {
            expected: "3".into(),
            got: spec.dimension,
        });
    }
    ClebschPotentials::new(
        sample_scalar(spec, STREAM_CLEBSCH_1)?,
        sample_scalar(spec, STREAM_CLEBSCH_2)?,
    )
}

/// v = ∇⊥φ = (∂₂φ, −∂₁φ).
pub fn velocity_from_stream(phi: &GridField) -> Result<GridField> {
    if phi.dimension() != 2 || phi.components() != 1 {
        return Err(Error::Dimension {
            expected: "scalar field on 𝕋²".into(),
            got: phi.dimension(),
        });
    }
    let d1 = phi.derivative(0)?;
    let d2 = phi.derivative(1)?;
    GridField::stack(&[d2, d1.negated()])
}

/// v = ∇φ₁ × ∇φ₂, formed on a 3/2-padded grid, truncated back and
/// projected onto divergence-free fields.
pub fn velocity_from_clebsch(pots: &ClebschPotentials) -> Result<ClebschVelocity> {
    let n = pots.phi1.resolution();
    let lat = Lattice::new(3, n);
    let n_pad = 3 * n / 2;
    let fft_pad = FftNd::new(3, n_pad);

    let padded_grad = |phi: &GridField| -> Vec<Vec<f64>> {
        let spec = phi.spectral_component(0);
        (0..3)
            .map(|a| {
                let d = spectral::derivative(lat, spec, a);
                fft_pad.inverse_real(&spectral::resample(lat, &d, n_pad))
            })
            .collect()
    };
    let g1 = padded_grad(&pots.phi1);
    let g2 = padded_grad(&pots.phi2);

    let len_pad = g1[0].len();
    let mut out = Vec::with_capacity(3 * lat.len());
    for c in 0..3 {
        let (a, b) = ((c + 1) % 3, (c + 2) % 3);
        let prod: Vec<f64> = (0..len_pad)
            .map(|i| g1[a][i] * g2[b][i] - g1[b][i] * g2[a][i])
            .collect();
        let spec = fft_pad.forward_real(&prod);
        out.extend(spectral::resample(Lattice::new(3, n_pad), &spec, n));
    }
    let raw = GridField::from_spectral(3, n, 3, out)?;
    let pre = divergence_residual(&raw)?;
    let velocity = project_solenoidal(&raw)?;
    Ok(ClebschVelocity {
        velocity,
        pre_projection_divergence: pre,
    })
}

/// Leray projection v̂ ← v̂ − k(k·v̂)/|k|².
pub fn project_solenoidal(v: &GridField) -> Result<GridField> {
    check_vector(v)?;
    let lat = v.lattice();
    let d = v.dimension();
    let len = lat.len();
    let mut spec = v.spectral().to_vec();
    for flat in 1..len {
        let k = lat.wavevector(flat);
        let k2: f64 = (0..d).map(|a| (k[a] * k[a]) as f64).sum();
        let dot: C64 = (0..d).map(|a| spec[a * len + flat] * k[a] as f64).sum();
        for a in 0..d {
            spec[a * len + flat] -= dot * (k[a] as f64 / k2);
        }
    }
    GridField::from_spectral(d, v.resolution(), d, spec)
}

fn check_vector(v: &GridField) -> Result<()> {
    if v.components() != v.dimension() || v.components() < 2 {
        return Err(Error::Shape(format!(
            "expected a {}-component vector field, got {} component(s)",
            v.dimension(),
            v.components()
        )));
    }
    Ok(())
}

/// max_k |2πk·v̂(k)| / (1 + |v̂(k)|·|2πk|) over all nonzero modes.
pub fn divergence_residual(v: &GridField) -> Result<f64> {
    check_vector(v)?;
    let lat = v.lattice();
    let d = v.dimension();
    let len = lat.len();
    let spec = v.spectral();
    let mut worst: f64 = 0.0;
    for flat in 1..len {
        let k = lat.wavevector(flat);
        let kv: Vec<f64> = (0..d).map(|a| TWO_PI * k[a] as f64).collect();
        let knorm = kv.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dot: C64 = (0..d).map(|a| spec[a * len + flat] * kv[a]).sum();
        let vnorm = (0..d).map(|a| spec[a * len + flat].norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(dot.norm() / (1.0 + vnorm * knorm));
    }
    Ok(worst)
}

/// Deterministic velocity fields used as references.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NamedField {
    /// v ≡ 0.
    Zero { dimension: usize },
    /// Constant velocity.
    Uniform { velocity: Vec<f64> },
    /// v = a·(cos 2πx₂, 0).
    Shear { amplitude: f64 },
    /// Cellular flow from the stream function a·sin(2πx₁)sin(2πx₂)/(2π).
    Cellular { amplitude: f64 },
    /// Arnold–Beltrami–Childress flow on 𝕋³ with unit coefficients.
    Abc { amplitude: f64 },
}

impl NamedField {
    pub fn dimension(&self) -> usize {
        match self {
            NamedField::Zero { dimension } => *dimension,
            NamedField::Uniform { velocity } => velocity.len(),
            NamedField::Shear { .. } | NamedField::Cellular { .. } => 2,
            NamedField::Abc { .. } => 3,
        }
    }

    pub fn sample(&self, resolution: usize) -> Result<GridField> {
        let d = self.dimension();
        if !(2..=3).contains(&d) {
            return Err(Error::Config(format!("named fields live in dimension 2 or 3, got {d}")));
        }
        match self {
            NamedField::Zero { .. } => GridField::zeros(d, resolution, d),
            NamedField::Uniform { velocity } => {
                GridField::from_fn(d, resolution, d, |_, o| o.copy_from_slice(velocity))
            }
            NamedField::Shear { amplitude } => GridField::from_fn(2, resolution, 2, |x, o| {
                o[0] = amplitude * (TWO_PI * x[1]).cos();
                o[1] = 0.0;
            }),
            NamedField::Cellular { amplitude } => GridField::from_fn(2, resolution, 2, |x, o| {
                let (s1, c1) = (TWO_PI * x[0]).sin_cos();
                let (s2, c2) = (TWO_PI * x[1]).sin_cos();
                o[0] = amplitude * s1 * c2;
                o[1] = -amplitude * c1 * s2;
            }),
            NamedField::Abc { amplitude } => GridField::from_fn(3, resolution, 3, |x, o| {
                let (s, c): (Vec<f64>, Vec<f64>) = x.iter().map(|&xi| (TWO_PI * xi).sin_cos()).unzip();
                o[0] = amplitude * (s[2] + c[1]);
                o[1] = amplitude * (s[0] + c[2]);
                o[2] = amplitude * (s[1] + c[0]);
            }),
        }
    }
}
