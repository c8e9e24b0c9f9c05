use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::solver::{initialize, solve, DissipationLedger, InitialData, ScalarState, SolverConfig};
use crate::spectral::{band_limit, dealias_cutoff};
use crate::stats::linear_fit;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVerdict {
    NoAnomalyConsistent,
    AnomalySuspected,
    Inconclusive,
}

impl SweepVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVerdict::NoAnomalyConsistent => "no_anomaly_consistent",
            SweepVerdict::AnomalySuspected => "anomaly_suspected",
            SweepVerdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictThresholds {
    /// D(ε_min) must fall below this fraction of D(ε_max).
    #[serde(default = "default_decrease")]
    pub decrease_factor: f64,
    /// Relative spread under which the last three D values count as a plateau.
    #[serde(default = "default_plateau")]
    pub plateau_tolerance: f64,
    /// A plateau must sit above this fraction of ∫θ_in².
    #[serde(default = "default_floor")]
    pub floor: f64,
}

fn default_decrease() -> f64 {
    0.2
}
fn default_plateau() -> f64 {
    0.1
}
fn default_floor() -> f64 {
    1e-3
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        VerdictThresholds {
            decrease_factor: default_decrease(),
            plateau_tolerance: default_plateau(),
            floor: default_floor(),
        }
    }
}

/// How each run's grid is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResolutionPolicy {
    /// Smallest power of two with √(εT) > margin·2/N, within [min, max].
    Auto {
        #[serde(default = "default_margin")]
        margin: f64,
        #[serde(default = "default_min_n")]
        min: usize,
        #[serde(default = "default_max_n")]
        max: usize,
    },
    /// The same N for every ε; unresolved ε are refused.
    Fixed { resolution: usize },
}

fn default_margin() -> f64 {
    1.0
}
fn default_min_n() -> usize {
    32
}
fn default_max_n() -> usize {
    512
}

impl Default for ResolutionPolicy {
    fn default() -> Self {
        ResolutionPolicy::Auto {
            margin: default_margin(),
            min: default_min_n(),
            max: default_max_n(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    /// Template; `epsilon` is overwritten per run.
    pub solver: SolverConfig,
    #[serde(default)]
    pub resolution: ResolutionPolicy,
    #[serde(default)]
    pub thresholds: VerdictThresholds,
}

/// One completed run of the sweep.
#[derive(Clone, Debug)]
pub struct SweepRun {
    pub epsilon: f64,
    pub resolution: usize,
    pub initial: ScalarState,
    pub state: ScalarState,
    pub ledger: DissipationLedger,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub epsilons: Vec<f64>,
    pub resolutions: Vec<usize>,
    pub dissipation: Vec<f64>,
    pub variance_deficit: Vec<f64>,
    pub initial_variance: f64,
    /// Least-squares slope of log D against log ε over the whole sweep.
    pub fit_slope: f64,
    /// The same slope over the three smallest ε.
    pub asymptotic_slope: f64,
    pub balance_residuals: Vec<f64>,
    pub verdict: SweepVerdict,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,dissipation,variance_deficit\n");
        for i in 0..self.epsilons.len() {
            s.push_str(&format!(
                "{},{},{}\n",
                self.epsilons[i], self.dissipation[i], self.variance_deficit[i]
            ));
        }
        s
    }
}

/// Smallest power-of-two N with √(εT) > margin·2/N.
pub fn minimal_resolution(epsilon: f64, t_final: f64, margin: f64) -> usize {
    let scale = (epsilon * t_final).sqrt();
    let mut n = 2usize;
    while !(scale > margin * 2.0 / n as f64) {
        n *= 2;
        if n > 1 << 24 {
            break;
        }
    }
    n
}

/// Smallest power-of-two N whose 2/3-rule band contains wavenumber k.
pub fn band_resolution(k: usize) -> usize {
    let mut n = 4usize;
    while dealias_cutoff(n) < k {
        n *= 2;
    }
    n
}

fn is_admissible(epsilon: f64, t_final: f64, n: usize, margin: f64) -> bool {
    (epsilon * t_final).sqrt() > margin * 2.0 / n as f64
}

/// Per-run resolutions, or the first refusal.
pub fn plan_resolutions(
    v: &GridField,
    data: &InitialData,
    cfg: &SweepConfig,
) -> Result<Vec<usize>> {
    let vel_band = band_limit(v.lattice(), v.spectral(), 1e-13 * v.max_abs().max(1e-300));
    let data_floor = data.cutoff.map(band_resolution).unwrap_or(0);
    let field_floor = band_resolution(vel_band).max(data_floor);
    let t = cfg.solver.t_final;
    cfg.epsilons
        .iter()
        .map(|&eps| match cfg.resolution {
            ResolutionPolicy::Fixed { resolution } => {
                let margin = 1.0;
                if !is_admissible(eps, t, resolution, margin) {
                    return Err(Error::Unresolved {
                        epsilon: eps,
                        resolution,
                        minimal_resolution: minimal_resolution(eps, t, margin).max(field_floor),
                    });
                }
                if resolution < field_floor {
                    return Err(Error::Config(format!(
                        "resolution {resolution} cannot hold the velocity and data bands; need N ≥ {field_floor}"
                    )));
                }
                Ok(resolution)
            }
            ResolutionPolicy::Auto { margin, min, max } => {
                let n = minimal_resolution(eps, t, margin).max(min).max(field_floor);
                if n > max {
                    return Err(Error::Unresolved {
                        epsilon: eps,
                        resolution: max,
                        minimal_resolution: n,
                    });
                }
                Ok(n)
            }
        })
        .collect()
}

fn validate(cfg: &SweepConfig) -> Result<()> {
    let e = &cfg.epsilons;
    if e.len() < 4 {
        return Err(Error::Input(format!("a sweep needs at least 4 epsilons, got {}", e.len())));
    }
    if e.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Input("sweep epsilons must be positive".into()));
    }
    for w in e.windows(2) {
        if !(w[1] <= 0.5 * w[0] * (1.0 + 1e-12)) {
            return Err(Error::Input(format!(
                "sweep epsilons must decrease by a factor of at least 2: {} then {}",
                w[0], w[1]
            )));
        }
    }
    cfg.solver.validate()
}

/// Classifies a dissipation sequence ordered by decreasing ε.
pub fn classify_sweep(dissipation: &[f64], initial_variance: f64, th: &VerdictThresholds) -> SweepVerdict {
    let n = dissipation.len();
    if n == 0 {
        return SweepVerdict::Inconclusive;
    }
    let decreasing = dissipation.windows(2).all(|w| w[1] < w[0]);
    if decreasing && dissipation[n - 1] < th.decrease_factor * dissipation[0] {
        return SweepVerdict::NoAnomalyConsistent;
    }
    if n >= 3 {
        let tail = &dissipation[n - 3..];
        let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        if hi - lo <= th.plateau_tolerance * hi && lo > th.floor * initial_variance {
            return SweepVerdict::AnomalySuspected;
        }
    }
    SweepVerdict::Inconclusive
}

fn log_slope(eps: &[f64], d: &[f64]) -> f64 {
    if d.iter().any(|&x| !(x > 0.0)) {
        return f64::NAN;
    }
    let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = d.iter().map(|x| x.ln()).collect();
    linear_fit(&lx, &ly).map(|f| f.slope).unwrap_or(f64::NAN)
}

/// Assembles the sweep summary from completed runs.
pub fn summarize_sweep(runs: &[SweepRun], thresholds: &VerdictThresholds) -> Result<SweepResult> {
    let first = runs.first().ok_or_else(|| Error::Input("no sweep runs".into()))?;
    let epsilons: Vec<f64> = runs.iter().map(|r| r.epsilon).collect();
    let dissipation: Vec<f64> = runs.iter().map(|r| r.ledger.final_dissipation()).collect();
    let variance_deficit = runs
        .iter()
        .map(|r| r.ledger.variance[0] - r.ledger.variance.last().copied().unwrap_or(r.ledger.variance[0]))
        .collect();
    let initial_variance = first.ledger.variance[0] + first.ledger.truncation_loss;
    let balance_residuals = runs
        .iter()
        .map(|r| crate::solver::energy_balance_residual(&r.ledger))
        .collect::<Result<Vec<_>>>()?;
    let k = epsilons.len();
    let tail = k.saturating_sub(3);
    Ok(SweepResult {
        fit_slope: log_slope(&epsilons, &dissipation),
        asymptotic_slope: log_slope(&epsilons[tail..], &dissipation[tail..]),
        verdict: classify_sweep(&dissipation, initial_variance, thresholds),
        resolutions: runs.iter().map(|r| r.resolution).collect(),
        epsilons,
        dissipation,
        variance_deficit,
        initial_variance,
        balance_residuals,
    })
}

/// Solves once per ε (concurrently) on a grid chosen by the resolution policy.
pub fn epsilon_sweep(
    v: &GridField,
    data: &InitialData,
    cfg: &SweepConfig,
) -> Result<(SweepResult, Vec<SweepRun>)> {
    validate(cfg)?;
    if data.dimension != v.dimension() {
        return Err(Error::Shape("initial data and velocity differ in dimension".into()));
    }
    let plan = plan_resolutions(v, data, cfg)?;
    let runs: Vec<SweepRun> = cfg
        .epsilons
        .par_iter()
        .zip(plan.par_iter())
        .map(|(&eps, &n)| {
            let vn = v.resampled(n)?;
            let init = initialize(data, n)?;
            let mut solver = cfg.solver.clone();
            solver.epsilon = eps;
            let (state, ledger) = solve(&init, &vn, &solver)?;
            Ok(SweepRun {
                epsilon: eps,
                resolution: n,
                initial: init,
                state,
                ledger,
            })
        })
        .collect::<Result<_>>()?;
    let result = summarize_sweep(&runs, &cfg.thresholds)?;
    Ok((result, runs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_rules() {
        let th = VerdictThresholds::default();
        assert_eq!(classify_sweep(&[0.3; 6], 1.0, &th), SweepVerdict::AnomalySuspected);
        assert_eq!(
            classify_sweep(&[1.0, 0.5, 0.25, 0.12, 0.06], 1.0, &th),
            SweepVerdict::NoAnomalyConsistent
        );
        // decreasing but too slowly, no plateau
        assert_eq!(classify_sweep(&[1.0, 0.9, 0.8, 0.7], 1.0, &th), SweepVerdict::Inconclusive);
        // plateau below the floor
        assert_eq!(classify_sweep(&[1e-5; 4], 1.0, &th), SweepVerdict::Inconclusive);
    }

    #[test]
    fn resolution_rule() {
        // √(2⁻¹²) = 2/128 exactly: not strictly larger, so 256
        assert_eq!(minimal_resolution(2f64.powi(-12), 1.0, 1.0), 256);
        assert_eq!(minimal_resolution(2f64.powi(-6), 1.0, 1.0), 32);
        assert_eq!(band_resolution(21), 64);
        assert_eq!(band_resolution(22), 128);
    }
}
