//! Discrete Fourier machinery on the uniform periodic grid {j/N}^d.
//!
//! Coefficients are normalized so that `f(x_j) = Σ_k f̂(k) e^{2πi k·x_j}`,
//! i.e. the forward transform carries the 1/N^d factor. Index `m` along an
//! axis stands for the wavenumber `m` when `m < N/2` and `m − N` otherwise.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub type C64 = Complex64;

pub const TWO_PI: f64 = 2.0 * PI;

/// Signed wavenumber of grid index `m` on an axis of length `n`.
#[inline]
pub fn wavenumber(m: usize, n: usize) -> i64 {
    if m < n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Grid index holding wavenumber `k` on an axis of length `n`.
#[inline]
pub fn mode_index(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Largest per-axis wavenumber kept by the 2/3 rule.
#[inline]
pub fn dealias_cutoff(n: usize) -> usize {
    (n.max(1) - 1) / 3
}

/// Index arithmetic for a cubic grid of side `n` in `dim` dimensions,
/// row-major with axis 0 slowest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lattice {
    pub dim: usize,
    pub n: usize,
}

impl Lattice {
    pub fn new(dim: usize, n: usize) -> Self {
        Lattice { dim, n }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    #[inline]
    pub fn coords(&self, mut flat: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for a in (0..self.dim).rev() {
            out[a] = flat % self.n;
            flat /= self.n;
        }
        out
    }

    #[inline]
    pub fn flat(&self, idx: &[usize]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    #[inline]
    pub fn wavevector(&self, flat: usize) -> [i64; 3] {
        let c = self.coords(flat);
        let mut k = [0i64; 3];
        for a in 0..self.dim {
            k[a] = wavenumber(c[a], self.n);
        }
        k
    }

    /// Flat index of the wavevector `k` (components beyond `dim` ignored).
    #[inline]
    pub fn index_of(&self, k: &[i64]) -> usize {
        k[..self.dim]
            .iter()
            .fold(0, |acc, &ki| acc * self.n + mode_index(ki, self.n))
    }

    /// Flat index of −k.
    #[inline]
    pub fn conj_index(&self, flat: usize) -> usize {
        let c = self.coords(flat);
        let mut acc = 0;
        for &ci in c.iter().take(self.dim) {
            acc = acc * self.n + (self.n - ci) % self.n;
        }
        acc
    }

    /// Grid point coordinates j/N.
    #[inline]
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let c = self.coords(flat);
        let h = 1.0 / self.n as f64;
        [c[0] as f64 * h, c[1] as f64 * h, c[2] as f64 * h]
    }

    /// True when any axis sits on the Nyquist index N/2.
    #[inline]
    pub fn touches_nyquist(&self, flat: usize) -> bool {
        let c = self.coords(flat);
        (0..self.dim).any(|a| c[a] == self.n / 2)
    }

    /// Whether the mode survives the 2/3-rule truncation.
    #[inline]
    pub fn in_band(&self, flat: usize, cutoff: usize) -> bool {
        let k = self.wavevector(flat);
        (0..self.dim).all(|a| k[a].unsigned_abs() as usize <= cutoff)
    }
}

/// Multi-dimensional complex FFT with the normalization described above.
pub struct FftNd {
    lattice: Lattice,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl FftNd {
    pub fn new(dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        FftNd {
            lattice: Lattice::new(dim, n),
            forward,
            inverse,
            scratch_len,
        }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    /// Grid values to normalized coefficients, in place.
    pub fn forward(&self, data: &mut [C64]) {
        self.transform(data, &self.forward);
        let scale = 1.0 / self.lattice.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    /// Coefficients to grid values, in place.
    pub fn inverse(&self, data: &mut [C64]) {
        self.transform(data, &self.inverse);
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<C64> {
        let mut buf: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Real part of the inverse transform.
    pub fn inverse_real(&self, spec: &[C64]) -> Vec<f64> {
        let mut buf = spec.to_vec();
        self.inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Inverse transform of two conjugate-symmetric spectra in one pass:
    /// returns (IFFT a, IFFT b) via the packing a + i b.
    pub fn inverse_pair(&self, a: &[C64], b: &[C64]) -> (Vec<f64>, Vec<f64>) {
        let i = C64::new(0.0, 1.0);
        let mut buf: Vec<C64> = a.iter().zip(b).map(|(&x, &y)| x + i * y).collect();
        self.inverse(&mut buf);
        buf.into_iter().map(|z| (z.re, z.im)).unzip()
    }

    fn transform(&self, data: &mut [C64], fft: &Arc<dyn Fft<f64>>) {
        let lat = self.lattice;
        let n = lat.n;
        assert_eq!(data.len(), lat.len(), "buffer does not match lattice");
        let mut scratch = vec![C64::new(0.0, 0.0); self.scratch_len];
        // Last axis is contiguous: one batched call.
        fft.process_with_scratch(data, &mut scratch);
        if lat.dim == 1 {
            return;
        }
        let mut buf = Vec::new();
        for axis in 0..lat.dim - 1 {
            let stride = lat.stride(axis);
            let block = n * stride;
            buf.resize(block, C64::new(0.0, 0.0));
            for chunk in data.chunks_exact_mut(block) {
                for j in 0..n {
                    let row = &chunk[j * stride..(j + 1) * stride];
                    for (i, &z) in row.iter().enumerate() {
                        buf[i * n + j] = z;
                    }
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for j in 0..n {
                    let row = &mut chunk[j * stride..(j + 1) * stride];
                    for (i, z) in row.iter_mut().enumerate() {
                        *z = buf[i * n + j];
                    }
                }
            }
        }
    }
}

/// Spectral derivative ∂/∂x_axis. The Nyquist plane of that axis is zeroed
/// so the result stays the transform of a real field.
pub fn derivative(lat: Lattice, spec: &[C64], axis: usize) -> Vec<C64> {
    let n = lat.n;
    let stride = lat.stride(axis);
    spec.iter()
        .enumerate()
        .map(|(flat, &z)| {
            let m = (flat / stride) % n;
            if n % 2 == 0 && m == n / 2 {
                C64::new(0.0, 0.0)
            } else {
                let k = wavenumber(m, n) as f64;
                z * C64::new(0.0, TWO_PI * k)
            }
        })
        .collect()
}

/// Coefficients of x ↦ f(x + s).
pub fn phase_shift(lat: Lattice, spec: &[C64], shift: &[f64]) -> Vec<C64> {
    // Per-axis phase tables keep this at one complex multiply per axis.
    let tables: Vec<Vec<C64>> = (0..lat.dim)
        .map(|a| {
            (0..lat.n)
                .map(|m| {
                    if lat.n % 2 == 0 && m == lat.n / 2 {
                        // Nyquist: the real cosine part of the shifted mode.
                        C64::new((TWO_PI * (lat.n / 2) as f64 * shift[a]).cos(), 0.0)
                    } else {
                        C64::from_polar(1.0, TWO_PI * wavenumber(m, lat.n) as f64 * shift[a])
                    }
                })
                .collect()
        })
        .collect();
    spec.iter()
        .enumerate()
        .map(|(flat, &z)| {
            let c = lat.coords(flat);
            (0..lat.dim).fold(z, |acc, a| acc * tables[a][c[a]])
        })
        .collect()
}

/// Move coefficients between resolutions. Modes outside the target band
/// are dropped, as are Nyquist modes of the source when upsampling.
pub fn resample(from: Lattice, spec: &[C64], n_to: usize) -> Vec<C64> {
    let to = Lattice::new(from.dim, n_to);
    let mut out = vec![C64::new(0.0, 0.0); to.len()];
    let half_to = (n_to / 2) as i64;
    for (flat, &z) in spec.iter().enumerate() {
        if z == C64::new(0.0, 0.0) {
            continue;
        }
        if n_to > from.n && from.touches_nyquist(flat) {
            continue;
        }
        let k = from.wavevector(flat);
        if (0..from.dim).all(|a| k[a] > -half_to && k[a] < half_to) {
            out[to.index_of(&k)] = z;
        }
    }
    out
}

/// Replace coefficients by the conjugate-symmetric part (f̂(k) + conj f̂(−k))/2.
pub fn symmetrize(lat: Lattice, spec: &mut [C64]) {
    for flat in 0..spec.len() {
        let c = lat.conj_index(flat);
        if c < flat {
            continue;
        }
        if c == flat {
            spec[flat].im = 0.0;
        } else {
            let avg = (spec[flat] + spec[c].conj()) * 0.5;
            spec[flat] = avg;
            spec[c] = avg.conj();
        }
    }
}

/// Zero every mode outside |k|∞ ≤ cutoff.
pub fn truncate(lat: Lattice, spec: &mut [C64], cutoff: usize) {
    for (flat, z) in spec.iter_mut().enumerate() {
        if !lat.in_band(flat, cutoff) {
            *z = C64::new(0.0, 0.0);
        }
    }
}

/// Largest |k|∞ carrying a coefficient above `tol` in modulus.
pub fn band_limit(lat: Lattice, spec: &[C64], tol: f64) -> usize {
    spec.iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > tol)
        .map(|(flat, _)| {
            let k = lat.wavevector(flat);
            (0..lat.dim).map(|a| k[a].unsigned_abs() as usize).max().unwrap_or(0)
        })
        .max()
        .unwrap_or(0)
}

/// Σ_k |f̂(k)|², the grid mean of f² by Parseval.
pub fn energy(spec: &[C64]) -> f64 {
    spec.iter().map(|z| z.norm_sqr()).sum()
}
