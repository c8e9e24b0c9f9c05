use crate::error::{Error, Result};
use crate::field::GridField;
use crate::spectral::C64;

/// Tensor-product cubic Hermite interpolant of a periodic grid field.
///
/// Node data are the values and all mixed first derivatives (∂₁, ∂₂, ∂₁∂₂,
/// ...) taken spectrally, so the interpolant is C¹, reproduces constants
/// exactly and has O(h⁴) error for smooth fields.
#[derive(Clone, Debug)]
pub struct HermiteInterpolator {
    dim: usize,
    n: usize,
    components: usize,
    /// Indexed by [mask][component][grid point]; bit a of mask means ∂_a.
    nodes: Vec<Vec<Vec<f64>>>,
}

fn basis(t: f64, h: f64) -> [[f64; 2]; 2] {
    let t2 = t * t;
    let t3 = t2 * t;
    // [corner][0 = value weight, 1 = slope weight]
    [
        [2.0 * t3 - 3.0 * t2 + 1.0, (t3 - 2.0 * t2 + t) * h],
        [-2.0 * t3 + 3.0 * t2, (t3 - t2) * h],
    ]
}

impl HermiteInterpolator {
    pub fn new(field: &GridField) -> Result<Self> {
        let dim = field.dimension();
        if !(1..=3).contains(&dim) {
            return Err(Error::Dimension {
                expected: "1, 2 or 3".into(),
                got: dim,
            });
        }
        let lat = field.lattice();
        let components = field.components();
        let fft = crate::spectral::FftNd::new(dim, lat.n);
        let nodes = (0..1usize << dim)
            .map(|mask| {
                (0..components)
                    .map(|c| {
                        let mut spec: Vec<C64> = field.spectral_component(c).to_vec();
                        for a in 0..dim {
                            if mask & (1 << a) != 0 {
                                spec = crate::spectral::derivative(lat, &spec, a);
                            }
                        }
                        if mask == 0 {
                            field.real_component(c).to_vec()
                        } else {
                            fft.inverse_real(&spec)
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(HermiteInterpolator {
            dim,
            n: lat.n,
            components,
            nodes,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Evaluates every component at x (any real coordinates; periodic).
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        let h = 1.0 / n as f64;
        let mut base = [0usize; 3];
        let mut w = [[[0.0; 2]; 2]; 3];
        for a in 0..self.dim {
            let s = x[a].rem_euclid(1.0) * n as f64;
            let i = (s.floor() as usize).min(n - 1);
            base[a] = i;
            w[a] = basis(s - i as f64, h);
        }
        for o in out.iter_mut().take(self.components) {
            *o = 0.0;
        }
        let corners = 1usize << self.dim;
        for corner in 0..corners {
            let mut flat = 0;
            for a in 0..self.dim {
                let i = (base[a] + ((corner >> a) & 1)) % n;
                flat = flat * n + i;
            }
            for mask in 0..corners {
                let mut weight = 1.0;
                for a in 0..self.dim {
                    weight *= w[a][(corner >> a) & 1][(mask >> a) & 1];
                }
                if weight == 0.0 {
                    continue;
                }
                for (c, o) in out.iter_mut().enumerate().take(self.components) {
                    *o += weight * self.nodes[mask][c][flat];
                }
            }
        }
    }
}

/// Exact evaluation of the trigonometric polynomial held by a field's
/// coefficients. Slow; kept for verification and for observables.
#[derive(Clone, Debug)]
pub struct SpectralEvaluator {
    dim: usize,
    modes: Vec<([f64; 3], C64)>,
}

impl SpectralEvaluator {
    /// Uses component 0 of the field.
    pub fn new(field: &GridField) -> Self {
        let lat = field.lattice();
        let modes = field
            .spectral_component(0)
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(f, &z)| {
                let k = lat.wavevector(f);
                ([k[0] as f64, k[1] as f64, k[2] as f64], z)
            })
            .collect();
        SpectralEvaluator {
            dim: field.dimension(),
            modes,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|(k, z)| {
                let phase: f64 = (0..self.dim).map(|a| k[a] * x[a]).sum::<f64>() * crate::spectral::TWO_PI;
                z.re * phase.cos() - z.im * phase.sin()
            })
            .sum()
    }
}
