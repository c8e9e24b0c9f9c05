use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::lagrangian::interp::HermiteInterpolator;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// One Brownian path drives every particle (a stochastic flow).
    #[default]
    Shared,
    /// Each particle has its own Brownian path.
    Independent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeConfig {
    pub epsilon: f64,
    pub dt: f64,
    pub t_final: f64,
    pub n_particles: usize,
    #[serde(default)]
    pub noise_mode: NoiseMode,
    #[serde(default)]
    pub seed: u64,
}

impl SdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be ≥ 0, got {}", self.epsilon)));
        }
        if !(self.dt > 0.0 && self.t_final > 0.0 && self.dt <= self.t_final) {
            return Err(Error::Config(format!(
                "need 0 < dt ≤ t_final, got dt = {} and t_final = {}",
                self.dt, self.t_final
            )));
        }
        if self.n_particles == 0 {
            return Err(Error::Config("n_particles must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Stream id used by the shared Brownian path; particle streams start at 1.
const SHARED_STREAM: u64 = 0;

/// Particle positions in the covering space ℝ^d with their RNG streams.
///
/// A position is stored as a per-particle part plus the Brownian
/// displacement common to all particles (zero in independent mode), so
/// shared noise cancels exactly in pair differences.
#[derive(Clone, Debug)]
pub struct ParticleEnsemble {
    dimension: usize,
    positions: Vec<f64>,
    common: [f64; 3],
    initial_positions: Vec<f64>,
    time: f64,
    noise_mode: NoiseMode,
    substreams: Vec<u64>,
    rngs: Vec<ChaCha8Rng>,
    shared: ChaCha8Rng,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl ParticleEnsemble {
    /// Positions are given flat, d coordinates per particle.
    pub fn new(dimension: usize, positions: Vec<f64>, noise_mode: NoiseMode, seed: u64) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return Err(Error::Dimension {
                expected: "1, 2 or 3".into(),
                got: dimension,
            });
        }
        if positions.is_empty() || positions.len() % dimension != 0 {
            return Err(Error::Input(format!(
                "{} coordinates do not form particles in dimension {dimension}",
                positions.len()
            )));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("particle positions must be finite".into()));
        }
        let count = positions.len() / dimension;
        let substreams: Vec<u64> = (1..=count as u64).collect();
        let rngs = match noise_mode {
            NoiseMode::Independent => substreams.iter().map(|&s| stream_rng(seed, s)).collect(),
            NoiseMode::Shared => Vec::new(),
        };
        Ok(ParticleEnsemble {
            dimension,
            initial_positions: positions.clone(),
            positions,
            common: [0.0; 3],
            time: 0.0,
            noise_mode,
            substreams,
            rngs,
            shared: stream_rng(seed, SHARED_STREAM),
        })
    }

    /// `count` copies of one starting point.
    pub fn replicated(point: &[f64], count: usize, noise_mode: NoiseMode, seed: u64) -> Result<Self> {
        let positions = point.iter().cycle().take(point.len() * count).copied().collect();
        Self::new(point.len(), positions, noise_mode, seed)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn noise_mode(&self) -> NoiseMode {
        self.noise_mode
    }

    pub fn rng_substream_ids(&self) -> &[u64] {
        &self.substreams
    }

    /// Unwrapped position of particle i.
    pub fn position(&self, i: usize) -> Vec<f64> {
        self.positions[i * self.dimension..(i + 1) * self.dimension]
            .iter()
            .zip(&self.common)
            .map(|(x, w)| x + w)
            .collect()
    }

    pub fn initial_position(&self, i: usize) -> &[f64] {
        &self.initial_positions[i * self.dimension..(i + 1) * self.dimension]
    }

    /// All unwrapped positions, flat.
    pub fn positions(&self) -> Vec<f64> {
        (0..self.len()).flat_map(|i| self.position(i)).collect()
    }

    /// Squared geodesic distance between particles i and j.
    pub fn distance_sq(&self, i: usize, j: usize) -> f64 {
        let d = self.dimension;
        crate::lagrangian::torus_distance_sq(&self.positions[i * d..(i + 1) * d], &self.positions[j * d..(j + 1) * d])
    }

    /// Position of particle i reduced to [0, 1)^d.
    pub fn wrapped(&self, i: usize) -> Vec<f64> {
        self.position(i)
            .iter()
            .map(|x| {
                let w = x.rem_euclid(1.0);
                // rem_euclid can round up to exactly 1
                if w >= 1.0 {
                    0.0
                } else {
                    w
                }
            })
            .collect()
    }
}

/// Euler–Maruyama from the ensemble's time up to `cfg.t_final`:
/// X ← X + v(X) dt + √(2ε dt) ξ. The step is shortened so it tiles the
/// interval exactly.
pub fn evolve_ensemble(ens: &ParticleEnsemble, v: &GridField, cfg: &SdeConfig) -> Result<ParticleEnsemble> {
    cfg.validate()?;
    let d = ens.dimension;
    if v.dimension() != d || v.components() != d {
        return Err(Error::Shape(format!(
            "velocity must be a {d}-component field in dimension {d}"
        )));
    }
    let span = cfg.t_final - ens.time;
    if span < 0.0 {
        return Err(Error::Input(format!(
            "ensemble is already at t = {}, past t_final = {}",
            ens.time, cfg.t_final
        )));
    }
    let mut out = ens.clone();
    if span == 0.0 {
        return Ok(out);
    }
    let steps = (span / cfg.dt).ceil().max(1.0) as usize;
    let dt = span / steps as f64;
    let n = v.resolution();
    let vmax = v.magnitude().into_iter().fold(0.0, f64::max);
    if vmax * dt > 0.5 / n as f64 {
        log::warn!(
            "particle step moves {:.3} grid cells (max|v| dt = {:.3e}, 1/N = {:.3e})",
            vmax * dt * n as f64,
            vmax * dt,
            1.0 / n as f64
        );
    }
    let interp = HermiteInterpolator::new(v)?;
    let noise = (2.0 * cfg.epsilon * dt).sqrt();

    match ens.noise_mode {
        NoiseMode::Shared => {
            for _ in 0..steps {
                let common = out.common;
                out.positions.par_chunks_mut(d).for_each(|z| {
                    let mut x = [0.0; 3];
                    for a in 0..d {
                        x[a] = z[a] + common[a];
                    }
                    let mut vel = [0.0; 3];
                    interp.eval(&x[..d], &mut vel);
                    for a in 0..d {
                        z[a] += vel[a] * dt;
                    }
                });
                // Draws are taken even when ε = 0 so streams stay aligned.
                for a in 0..d {
                    let xi: f64 = out.shared.sample(StandardNormal);
                    out.common[a] += noise * xi;
                }
            }
        }
        NoiseMode::Independent => {
            out.positions
                .par_chunks_mut(d)
                .zip(out.rngs.par_iter_mut())
                .for_each(|(x, rng)| {
                    let mut vel = [0.0; 3];
                    for _ in 0..steps {
                        interp.eval(x, &mut vel);
                        for a in 0..d {
                            let xi: f64 = rng.sample(StandardNormal);
                            x[a] += vel[a] * dt + noise * xi;
                        }
                    }
                });
        }
    }
    out.time = cfg.t_final;
    Ok(out)
}
