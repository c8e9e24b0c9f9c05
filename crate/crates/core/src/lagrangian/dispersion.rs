use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::lagrangian::ensemble::{evolve_ensemble, NoiseMode, ParticleEnsemble, SdeConfig};
use crate::stats::mean_sem;

/// Squared geodesic distance on the flat torus (minimum image).
pub fn torus_distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            let d = d - d.round();
            d * d
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStat {
    pub mean_d2: f64,
    pub sem: f64,
    pub pairs: usize,
}

/// Mean squared geodesic distance over the given index pairs.
pub fn pair_dispersion(ens: &ParticleEnsemble, pairs: &[(usize, usize)]) -> Result<PairStat> {
    if pairs.is_empty() {
        return Err(Error::Input("empty pairing".into()));
    }
    let n = ens.len();
    let mut d2 = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        if i >= n || j >= n {
            return Err(Error::Input(format!("pair ({i}, {j}) out of range for {n} particles")));
        }
        d2.push(ens.distance_sq(i, j));
    }
    let (mean_d2, sem) = mean_sem(&d2);
    Ok(PairStat {
        mean_d2,
        sem,
        pairs: pairs.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionCurve {
    pub times: Vec<f64>,
    pub mean_d2: Vec<f64>,
    pub sem: Vec<f64>,
}

impl DispersionCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,mean_d2,sem\n");
        for i in 0..self.times.len() {
            s.push_str(&format!("{},{},{}\n", self.times[i], self.mean_d2[i], self.sem[i]));
        }
        s
    }
}

/// Pair dispersion sampled at each of `times` (increasing, ≤ cfg.t_final).
pub fn dispersion_curve(
    ens: &ParticleEnsemble,
    v: &GridField,
    cfg: &SdeConfig,
    pairs: &[(usize, usize)],
    times: &[f64],
) -> Result<(DispersionCurve, ParticleEnsemble)> {
    let mut cur = ens.clone();
    let mut curve = DispersionCurve {
        times: Vec::new(),
        mean_d2: Vec::new(),
        sem: Vec::new(),
    };
    for &t in times {
        let mut step_cfg = cfg.clone();
        step_cfg.t_final = t;
        step_cfg.dt = cfg.dt.min((t - cur.time()).max(f64::MIN_POSITIVE));
        cur = evolve_ensemble(&cur, v, &step_cfg)?;
        let stat = pair_dispersion(&cur, pairs)?;
        curve.times.push(t);
        curve.mean_d2.push(stat.mean_d2);
        curve.sem.push(stat.sem);
    }
    Ok((curve, cur))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RichardsonVerdict {
    NoDispersionConsistent,
    DispersionSuspected,
    Inconclusive,
}

impl RichardsonVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            RichardsonVerdict::NoDispersionConsistent => "no_dispersion_consistent",
            RichardsonVerdict::DispersionSuspected => "dispersion_suspected",
            RichardsonVerdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RichardsonConfig {
    /// Decreasing diffusivities, at least three.
    pub epsilons: Vec<f64>,
    /// Cells per axis of the grid of pair starting points.
    pub pair_grid: usize,
    /// Initial pair separation.
    pub rho0: f64,
    /// Independent noise realizations per ε.
    pub replicas: usize,
    pub dt: f64,
    #[serde(default = "default_time")]
    pub t_final: f64,
    #[serde(default)]
    pub noise_mode: NoiseMode,
    #[serde(default)]
    pub seed: u64,
}

fn default_time() -> f64 {
    1.0
}

/// Per-cell dispersion statistics across the ε sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RichardsonData {
    pub epsilons: Vec<f64>,
    /// [ε][cell]
    pub mean_d2: Vec<Vec<f64>>,
    pub sem: Vec<Vec<f64>>,
    /// Separation under the ε = 0 flow from the same integrator, per cell.
    pub deterministic_d2: Vec<f64>,
}

impl RichardsonData {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,cell,mean_d2,sem,deterministic_d2\n");
        for (e, eps) in self.epsilons.iter().enumerate() {
            for c in 0..self.deterministic_d2.len() {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    eps, c, self.mean_d2[e][c], self.sem[e][c], self.deterministic_d2[c]
                ));
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RichardsonReport {
    pub verdict: RichardsonVerdict,
    /// Fraction of cells whose excess over the flow separation persists.
    pub persistent_fraction: f64,
    /// Largest fitted lower bound δ on the persistent excess (0 if none).
    pub fitted_delta: f64,
}

/// Pair starting points: cell centres on a g^d grid, partners offset by ρ₀ along x₁.
pub fn pair_grid_positions(dimension: usize, grid: usize, rho0: f64) -> Vec<f64> {
    let cells = grid.pow(dimension as u32);
    let mut pos = Vec::with_capacity(2 * cells * dimension);
    for c in 0..cells {
        let mut centre = vec![0.0; dimension];
        let mut rem = c;
        for a in (0..dimension).rev() {
            centre[a] = ((rem % grid) as f64 + 0.5) / grid as f64;
            rem /= grid;
        }
        pos.extend_from_slice(&centre);
        centre[0] += rho0;
        pos.extend_from_slice(&centre);
    }
    pos
}

fn replica_seed(seed: u64, replica: usize) -> u64 {
    use rand::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x5249 + replica as u64);
    rng.next_u64()
}

/// Runs the pair grid for every ε. Replica r uses the same noise seed at
/// every ε, so the curves share their random numbers.
pub fn richardson_sweep(v: &GridField, cfg: &RichardsonConfig) -> Result<RichardsonData> {
    if cfg.epsilons.len() < 3 {
        return Err(Error::Input("a dispersion sweep needs at least 3 epsilons".into()));
    }
    if cfg.epsilons.windows(2).any(|w| !(w[1] < w[0])) || cfg.epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Input("dispersion epsilons must be positive and decreasing".into()));
    }
    if cfg.pair_grid == 0 || cfg.replicas < 2 || !(cfg.rho0 > 0.0) {
        return Err(Error::Input("need pair_grid ≥ 1, replicas ≥ 2 and rho0 > 0".into()));
    }
    let d = v.dimension();
    let start = pair_grid_positions(d, cfg.pair_grid, cfg.rho0);
    let cells = start.len() / (2 * d);
    let pairs: Vec<(usize, usize)> = (0..cells).map(|c| (2 * c, 2 * c + 1)).collect();
    let sde = |eps: f64, seed: u64| SdeConfig {
        epsilon: eps,
        dt: cfg.dt,
        t_final: cfg.t_final,
        n_particles: 2 * cells,
        noise_mode: cfg.noise_mode,
        seed,
    };
    let flow = evolve_ensemble(
        &ParticleEnsemble::new(d, start.clone(), NoiseMode::Shared, cfg.seed)?,
        v,
        &sde(0.0, cfg.seed),
    )?;
    let deterministic_d2 = pairs
        .iter()
        .map(|&(i, j)| flow.distance_sq(i, j))
        .collect();
    let mut mean_d2 = Vec::new();
    let mut sem = Vec::new();
    for &eps in &cfg.epsilons {
        let mut samples = vec![Vec::with_capacity(cfg.replicas); cells];
        for r in 0..cfg.replicas {
            let seed = replica_seed(cfg.seed, r);
            let ens = ParticleEnsemble::new(d, start.clone(), cfg.noise_mode, seed)?;
            let fin = evolve_ensemble(&ens, v, &sde(eps, seed))?;
            for (c, &(i, j)) in pairs.iter().enumerate() {
                samples[c].push(fin.distance_sq(i, j));
            }
        }
        let stats: Vec<(f64, f64)> = samples.iter().map(|s| mean_sem(s)).collect();
        mean_d2.push(stats.iter().map(|s| s.0).collect());
        sem.push(stats.iter().map(|s| s.1).collect());
    }
    Ok(RichardsonData {
        epsilons: cfg.epsilons.clone(),
        mean_d2,
        sem,
        deterministic_d2,
    })
}

/// Number of smallest diffusivities on which the approach to the flow
/// separation is judged.
const TAIL: usize = 3;

/// Classifies per-cell excess g_ε = 𝔼[d²] − d²_flow along decreasing ε.
///
/// A cell is persistent when g_ε − 3·SEM stays positive at every ε and
/// the excess at the smallest ε is at least half its largest value. The
/// data are consistent with no dispersion when every cell's |g_ε| is
/// nonincreasing within 3 combined standard errors on the three smallest
/// ε and ends no larger than at the largest ε or at the start of that
/// window (or within 3 standard errors of zero). At larger ε the noise alone can open or close the gap, so the
/// curve may rise before it decays.
pub fn richardson_verdict(data: &RichardsonData) -> Result<RichardsonReport> {
    let k = data.epsilons.len();
    if k < TAIL {
        return Err(Error::Input("need at least 3 epsilons".into()));
    }
    let cells = data.deterministic_d2.len();
    if cells == 0 || data.mean_d2.len() != k || data.sem.len() != k {
        return Err(Error::Input("dispersion data are inconsistent".into()));
    }
    let mut persistent = 0usize;
    let mut consistent = true;
    let mut fitted_delta: f64 = 0.0;
    for c in 0..cells {
        let gap: Vec<f64> = (0..k).map(|e| data.mean_d2[e][c] - data.deterministic_d2[c]).collect();
        let se: Vec<f64> = (0..k).map(|e| data.sem[e][c]).collect();
        let last = gap[k - 1];
        let lower = (0..k).map(|e| gap[e] - 3.0 * se[e]).fold(f64::INFINITY, f64::min);
        let peak = gap.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lower > 0.0 && last >= 0.5 * peak {
            persistent += 1;
            fitted_delta = fitted_delta.max(lower);
        }
        let t0 = k - TAIL;
        let monotone = (t0 + 1..k)
            .all(|e| gap[e].abs() <= gap[e - 1].abs() + 3.0 * (se[e].powi(2) + se[e - 1].powi(2)).sqrt());
        let settles =
            last.abs() <= 3.0 * se[k - 1] || last.abs() <= gap[0].abs() || last.abs() <= gap[t0].abs();
        if !(monotone && settles) {
            consistent = false;
        }
    }
    let persistent_fraction = persistent as f64 / cells as f64;
    let verdict = if persistent_fraction > 0.1 {
        RichardsonVerdict::DispersionSuspected
    } else if consistent {
        RichardsonVerdict::NoDispersionConsistent
    } else {
        RichardsonVerdict::Inconclusive
    };
    Ok(RichardsonReport {
        verdict,
        persistent_fraction,
        fitted_delta,
    })
}
