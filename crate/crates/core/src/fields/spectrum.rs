use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::dealias_cutoff;

/// Slack added to the decay exponent so that the target exponent sits
/// strictly inside the regularity class.
pub const REGULARITY_MARGIN: f64 = 0.05;

/// Decay exponent γ for which σ_k = |k|^−γ yields C^{1,α} samples.
pub fn decay_for_alpha(dimension: usize, alpha: f64) -> f64 {
    dimension as f64 / 2.0 + 1.0 + alpha + REGULARITY_MARGIN
}

/// One explicit row of the mode table. Modes absent from the table take
/// mean 0 and the decay-law deviation (or 0 without a law).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub k: Vec<i64>,
    #[serde(default)]
    pub mean: f64,
    #[serde(default)]
    pub stddev: Option<f64>,
}

/// Gaussian random potential on the torus: independent coefficients per
/// lattice mode with prescribed means and standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub dimension: usize,
    pub resolution: usize,
    pub max_wavenumber: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_exponent: Option<f64>,
    /// Alternative to `decay_exponent`: the Hölder exponent of Dφ to aim for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_target: Option<f64>,
    /// Overall prefactor A in σ_k = A·|k|^−γ.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modes: Vec<ModeSpec>,
    #[serde(default)]
    pub seed: u64,
}

fn default_amplitude() -> f64 {
    1.0
}

pub(crate) type Mode = [i64; 3];

/// A drawn coefficient for the half-space representative `k`; the
/// coefficient of −k is its conjugate.
#[derive(Clone, Copy, Debug)]
pub(crate) struct DrawnMode {
    pub k: Mode,
    pub coefficient: Complex64,
}

impl SpectrumConfig {
    /// A spectrum with no modes switched on.
    pub fn empty(dimension: usize, resolution: usize, max_wavenumber: usize) -> Self {
        SpectrumConfig {
            dimension,
            resolution,
            max_wavenumber,
            decay_exponent: None,
            alpha_target: None,
            amplitude: 1.0,
            modes: Vec::new(),
            seed: 0,
        }
    }

    pub fn with_power_law(
        dimension: usize,
        resolution: usize,
        max_wavenumber: usize,
        alpha: f64,
        amplitude: f64,
        seed: u64,
    ) -> Self {
        SpectrumConfig {
            alpha_target: Some(alpha),
            amplitude,
            seed,
            ..SpectrumConfig::empty(dimension, resolution, max_wavenumber)
        }
    }

    pub fn effective_decay(&self) -> Option<f64> {
        self.decay_exponent
            .or_else(|| self.alpha_target.map(|a| decay_for_alpha(self.dimension, a)))
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dimension) {
            return Err(Error::Config(format!(
                "dimension must be 2 or 3, got {}",
                self.dimension
            )));
        }
        if self.resolution < 4 || !self.resolution.is_power_of_two() {
            return Err(Error::Config(format!(
                "resolution must be a power of two ≥ 4, got {}",
                self.resolution
            )));
        }
        if self.max_wavenumber == 0 {
            return Err(Error::Config("max_wavenumber must be ≥ 1".into()));
        }
        let cap = dealias_cutoff(self.resolution);
        if self.max_wavenumber > cap {
            return Err(Error::Config(format!(
                "max_wavenumber {} exceeds N/3 = {} at resolution {}",
                self.max_wavenumber, cap, self.resolution
            )));
        }
        if self.decay_exponent.is_some() && self.alpha_target.is_some() {
            return Err(Error::Config(
                "decay_exponent and alpha_target are mutually exclusive".into(),
            ));
        }
        if let Some(g) = self.decay_exponent {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("decay_exponent must be > 0, got {g}")));
            }
        }
        if let Some(a) = self.alpha_target {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::Config(format!("alpha_target must lie in [0, 1], got {a}")));
            }
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Config(format!("amplitude must be ≥ 0, got {}", self.amplitude)));
        }
        for m in &self.modes {
            if m.k.len() != self.dimension {
                return Err(Error::Config(format!(
                    "mode {:?} has {} entries, expected {}",
                    m.k,
                    m.k.len(),
                    self.dimension
                )));
            }
            if m.k.iter().all(|&c| c == 0) {
                return Err(Error::Config("the zero mode cannot be prescribed".into()));
            }
            if m.k.iter().any(|c| c.unsigned_abs() as usize > self.max_wavenumber) {
                return Err(Error::Config(format!(
                    "mode {:?} lies outside |k|∞ ≤ {}",
                    m.k, self.max_wavenumber
                )));
            }
            if let Some(s) = m.stddev {
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(Error::Config(format!("stddev of mode {:?} must be ≥ 0", m.k)));
                }
            }
        }
        Ok(())
    }

    fn table(&self) -> BTreeMap<Mode, (f64, Option<f64>)> {
        self.modes
            .iter()
            .map(|m| {
                let mut k = [0i64; 3];
                k[..m.k.len()].copy_from_slice(&m.k);
                (k, (m.mean, m.stddev))
            })
            .collect()
    }

    fn law(&self, k: &Mode) -> f64 {
        match self.effective_decay() {
            Some(g) => {
                let norm = k.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
                self.amplitude * norm.powf(-g)
            }
            None => 0.0,
        }
    }

    /// Half-space representatives with their (symmetrized) mean and deviation.
    pub(crate) fn retained_modes(&self) -> Vec<(Mode, f64, f64)> {
        let table = self.table();
        let kmax = self.max_wavenumber as i64;
        let d = self.dimension;
        let mut out = Vec::new();
        let range = |active: bool| if active { -kmax..=kmax } else { 0..=0 };
        for k0 in range(true) {
            for k1 in range(d >= 2) {
                for k2 in range(d >= 3) {
                    let k = [k0, k1, k2];
                    if !is_representative(&k) {
                        continue;
                    }
                    let neg = [-k0, -k1, -k2];
                    let lookup = |m: &Mode| table.get(m).copied();
                    let (mp, sp) = lookup(&k).unwrap_or((0.0, None));
                    let (mn, sn) = lookup(&neg).unwrap_or((0.0, None));
                    let mean = 0.5 * (mp + mn);
                    let stddev = sp.or(sn).unwrap_or_else(|| self.law(&k));
                    out.push((k, mean, stddev));
                }
            }
        }
        out
    }

    /// Draws one coefficient per half-space mode from `rng`. Two normals are
    /// consumed per mode whatever the spectrum, so substreams stay aligned.
    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<DrawnMode> {
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        self.retained_modes()
            .into_iter()
            .map(|(k, mean, stddev)| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                DrawnMode {
                    k,
                    coefficient: Complex64::new(mean + stddev * a * inv_sqrt2, stddev * b * inv_sqrt2),
                }
            })
            .collect()
    }

    pub(crate) fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// First nonzero component positive.
pub(crate) fn is_representative(k: &Mode) -> bool {
    match k.iter().find(|&&c| c != 0) {
        Some(&c) => c > 0,
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn representatives_cover_half_the_cube() {
        let spec = SpectrumConfig::empty(2, 16, 3);
        // (7² − 1)/2 modes
        assert_eq!(spec.retained_modes().len(), 24);
        let spec3 = SpectrumConfig::empty(3, 16, 2);
        assert_eq!(spec3.retained_modes().len(), 62);
    }

    #[test]
    fn validation_catches_bad_specs() {
        let mut s = SpectrumConfig::empty(2, 64, 22);
        assert!(s.validate().is_err());
        s.max_wavenumber = 21;
        assert!(s.validate().is_ok());
        s.modes.push(ModeSpec { k: vec![0, 0], mean: 1.0, stddev: None });
        assert!(s.validate().is_err());
        s.modes[0].k = vec![1, 0, 0];
        assert!(s.validate().is_err());
        let mut t = SpectrumConfig::with_power_law(2, 64, 8, 0.5, 1.0, 1);
        t.decay_exponent = Some(2.0);
        assert!(t.validate().is_err());
    }

    #[test]
    fn power_law_exponent() {
        let s = SpectrumConfig::with_power_law(2, 64, 8, 0.5, 2.0, 0);
        assert!((s.effective_decay().unwrap() - 2.55).abs() < 1e-15);
        let (k, _, sd) = s.retained_modes().into_iter().find(|m| m.0 == [3, 4, 0]).unwrap();
        assert_eq!(k, [3, 4, 0]);
        assert!((sd - 2.0 * 5f64.powf(-2.55)).abs() < 1e-15);
    }
}
