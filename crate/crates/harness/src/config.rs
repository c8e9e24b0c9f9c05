//! Experiment configuration: a TOML document with one table per stage.

use std::path::PathBuf;

use mixlab_core::diagnostics::{ResolutionPolicy, VerdictThresholds, DEFAULT_DIRECTIONS};
use mixlab_core::fields::{NamedField, SpectrumConfig};
use mixlab_core::lagrangian::NoiseMode;
use mixlab_core::sard::AlphaSource;
use mixlab_core::solver::{InitialData, InitialKind, SolverConfig, TimeStep};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SampleField,
    Solve,
    SweepDissipation,
    Yaglom,
    Richardson,
    Boxdim,
    MorseSard,
    FullReport,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::SampleField,
        ExperimentKind::Solve,
        ExperimentKind::SweepDissipation,
        ExperimentKind::Yaglom,
        ExperimentKind::Richardson,
        ExperimentKind::Boxdim,
        ExperimentKind::MorseSard,
        ExperimentKind::FullReport,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::SampleField => "sample_field",
            ExperimentKind::Solve => "solve",
            ExperimentKind::SweepDissipation => "sweep_dissipation",
            ExperimentKind::Yaglom => "yaglom",
            ExperimentKind::Richardson => "richardson",
            ExperimentKind::Boxdim => "boxdim",
            ExperimentKind::MorseSard => "morse_sard",
            ExperimentKind::FullReport => "full_report",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Velocity source: a Gaussian potential or a deterministic reference flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// Stream function in 2D, Clebsch pair in 3D. The seed is derived from
    /// the master seed.
    Gaussian(SpectrumConfig),
    Named { field: NamedField, resolution: usize },
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::Gaussian(SpectrumConfig::with_power_law(2, 64, 8, 0.5, 0.013, 0))
    }
}

impl FieldSpec {
    pub fn dimension(&self) -> usize {
        match self {
            FieldSpec::Gaussian(s) => s.dimension,
            FieldSpec::Named { field, .. } => field.dimension(),
        }
    }

    pub fn resolution(&self) -> usize {
        match self {
            FieldSpec::Gaussian(s) => s.resolution,
            FieldSpec::Named { resolution, .. } => *resolution,
        }
    }
}

/// Solver settings; `epsilon` is replaced per run inside sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_solve_epsilon")]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub t_final: f64,
    #[serde(default)]
    pub dt: TimeStep,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default = "yes")]
    pub dealias: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_cadence: Option<f64>,
    #[serde(default = "default_diffusion_number")]
    pub max_diffusion_number: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            epsilon: default_solve_epsilon(),
            t_final: 1.0,
            dt: TimeStep::Auto,
            cfl_safety: default_cfl(),
            dealias: true,
            output_cadence: None,
            max_diffusion_number: default_diffusion_number(),
        }
    }
}

impl SolverSection {
    pub fn to_config(&self, epsilon: f64) -> SolverConfig {
        SolverConfig {
            epsilon,
            dt: self.dt,
            t_final: self.t_final,
            cfl_safety: self.cfl_safety,
            dealias: self.dealias,
            output_cadence: self.output_cadence,
            max_diffusion_number: self.max_diffusion_number,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_sweep_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_policy")]
    pub resolution: ResolutionPolicy,
    #[serde(default)]
    pub thresholds: VerdictThresholds,
    /// Quadrature directions for Yaglom averages and structure functions.
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_structure_radii")]
    pub structure_radii: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            epsilons: default_sweep_epsilons(),
            resolution: default_policy(),
            thresholds: VerdictThresholds::default(),
            directions: default_directions(),
            structure_radii: default_structure_radii(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSection {
    #[serde(default = "default_particle_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_pair_grid")]
    pub pair_grid: usize,
    #[serde(default = "default_rho0")]
    pub rho0: f64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_particle_dt")]
    pub dt: f64,
    #[serde(default = "one")]
    pub t_final: f64,
    #[serde(default)]
    pub noise_mode: NoiseMode,
    /// Sampling times of the dispersion curve at the smallest ε.
    #[serde(default = "default_dispersion_times")]
    pub dispersion_times: Vec<f64>,
}

impl Default for ParticleSection {
    fn default() -> Self {
        ParticleSection {
            epsilons: default_particle_epsilons(),
            pair_grid: default_pair_grid(),
            rho0: default_rho0(),
            replicas: default_replicas(),
            dt: default_particle_dt(),
            t_final: 1.0,
            noise_mode: NoiseMode::default(),
            dispersion_times: default_dispersion_times(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeynmanKacSection {
    #[serde(default = "default_solve_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_particle_dt")]
    pub dt: f64,
    #[serde(default = "default_fk_time")]
    pub t_final: f64,
    #[serde(default = "default_fk_particles")]
    pub n_particles: usize,
    /// Grid points of the velocity grid.
    #[serde(default = "default_probes")]
    pub probes: Vec<Vec<f64>>,
    /// Added to 3·SEM in the pass test.
    #[serde(default = "default_fk_tolerance")]
    pub tolerance: f64,
}

impl Default for FeynmanKacSection {
    fn default() -> Self {
        FeynmanKacSection {
            epsilon: default_solve_epsilon(),
            dt: default_particle_dt(),
            t_final: default_fk_time(),
            n_particles: default_fk_particles(),
            probes: default_probes(),
            tolerance: default_fk_tolerance(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SardSection {
    #[serde(default)]
    pub rank_bound: usize,
    /// Cube levels; defaults to 1 ..= log₂(N/4).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<u32>>,
    #[serde(default = "default_bin_widths")]
    pub bin_widths: Vec<f64>,
    #[serde(default)]
    pub alpha_source: AlphaSource,
}

impl Default for SardSection {
    fn default() -> Self {
        SardSection {
            rank_bound: 0,
            levels: None,
            bin_widths: default_bin_widths(),
            alpha_source: AlphaSource::Estimated,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "one_usize")]
    pub realizations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub field: FieldSpec,
    #[serde(default = "default_initial")]
    pub initial: InitialData,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub particles: ParticleSection,
    #[serde(default)]
    pub feynman_kac: FeynmanKacSection,
    #[serde(default)]
    pub sard: SardSection,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_solve_epsilon() -> f64 {
    1e-2
}
fn default_cfl() -> f64 {
    0.5
}
fn default_diffusion_number() -> f64 {
    1.5
}
fn default_sweep_epsilons() -> Vec<f64> {
    (6..=13).map(|j| 0.5f64.powi(j)).collect()
}
fn default_policy() -> ResolutionPolicy {
    ResolutionPolicy::Auto {
        margin: 1.0,
        min: 64,
        max: 512,
    }
}
fn default_directions() -> usize {
    DEFAULT_DIRECTIONS
}
fn default_structure_radii() -> Vec<f64> {
    vec![1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0]
}
fn default_particle_epsilons() -> Vec<f64> {
    (6..=18).map(|j| 0.5f64.powi(j)).collect()
}
fn default_pair_grid() -> usize {
    4
}
fn default_rho0() -> f64 {
    1.0 / 16.0
}
fn default_replicas() -> usize {
    64
}
fn default_particle_dt() -> f64 {
    1e-3
}
fn default_dispersion_times() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}
fn default_fk_time() -> f64 {
    0.5
}
fn default_fk_particles() -> usize {
    2000
}
fn default_probes() -> Vec<Vec<f64>> {
    vec![vec![0.25, 0.25], vec![0.5, 0.75]]
}
fn default_fk_tolerance() -> f64 {
    1e-3
}
fn default_bin_widths() -> Vec<f64> {
    (2..=10).map(|j| 0.5f64.powi(j)).collect()
}
fn default_initial() -> InitialData {
    InitialData::new(2, InitialKind::Checkerboard { cells: 2 }).with_cutoff(6)
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// The key assigned on the given line, if any.
fn key_on_line(text: &str, line: usize) -> Option<String> {
    let l = text.lines().nth(line.checked_sub(1)?)?;
    let (k, _) = l.split_once('=')?;
    let k = k.trim().trim_matches('"');
    (!k.is_empty() && !k.starts_with('[')).then(|| k.to_string())
}

fn line_of_key_after(text: &str, key: &str, from: usize) -> Option<usize> {
    (from..=text.lines().count()).find(|&l| key_on_line(text, l).as_deref() == Some(key))
}

fn backticked(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let end = start + msg[start..].find('`')?;
    Some(msg[start..end].to_string())
}

/// Line of `dotted` (e.g. "sweep.epsilons") in a TOML document, found by
/// tracking table headers; inline tables are searched by their leaf key.
pub fn locate_key(text: &str, dotted: &str) -> Option<usize> {
    let (table, leaf) = match dotted.rsplit_once('.') {
        Some((t, l)) => (t, l),
        None => ("", dotted),
    };
    let mut current = String::new();
    let mut fallback = None;
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.starts_with('[') && !l.starts_with("[[") {
            current = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if let Some((k, _)) = l.split_once('=') {
            let k = k.trim().trim_matches('"');
            let full = if current.is_empty() { k.to_string() } else { format!("{current}.{k}") };
            if full == dotted || (current == table && k == leaf) {
                return Some(i + 1);
            }
            // dotted or inline forms: `sweep.epsilons = ...` or `sweep = { epsilons = ... }`
            if fallback.is_none() && (k == leaf || l.contains(&format!("{leaf} ="))) {
                fallback = Some(i + 1);
            }
        }
    }
    fallback
}

fn constraint(text: &str, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::new(Some(key.to_string()), locate_key(text, key), message)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        let msg = e.message().to_string();
        let on_line = line.and_then(|l| key_on_line(text, l));
        let key = backticked(&msg).or(on_line.clone());
        // flattened tables report the table header; point at the key itself
        let line = match (&key, line) {
            (Some(k), Some(l)) if on_line.as_deref() != Some(k.as_str()) => {
                line_of_key_after(text, k, l).or(Some(l))
            }
            _ => line,
        };
        ConfigError::new(key, line, msg)
    })?;
    validate(&cfg, text)?;
    Ok(cfg)
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.iter().all(|&x| x > 0.0 && x.is_finite()) && xs.windows(2).all(|w| w[1] < w[0])
}

/// Constraint checks that serde cannot express.
pub fn validate(cfg: &ExperimentConfig, text: &str) -> Result<(), ConfigError> {
    if cfg.master_seed > i64::MAX as u64 {
        return Err(constraint(text, "master_seed", "must be at most 2^63 − 1"));
    }
    if cfg.realizations == 0 {
        return Err(constraint(text, "realizations", "must be at least 1"));
    }
    let d = cfg.field.dimension();
    match &cfg.field {
        FieldSpec::Gaussian(s) => {
            if s.seed != 0 {
                return Err(constraint(
                    text,
                    "field.seed",
                    "field seeds are derived from master_seed; set master_seed instead",
                ));
            }
            s.validate().map_err(|e| ConfigError::new(Some("field".into()), locate_key(text, "field.source"), e.to_string()))?;
        }
        FieldSpec::Named { field, resolution } => {
            if !(2..=3).contains(&field.dimension()) {
                return Err(constraint(text, "field.field", "named fields live in dimension 2 or 3"));
            }
            if *resolution < 4 || !resolution.is_power_of_two() {
                return Err(constraint(text, "field.resolution", "must be a power of two ≥ 4"));
            }
        }
    }
    if cfg.initial.dimension != d {
        return Err(constraint(
            text,
            "initial.dimension",
            format!("initial data in dimension {} but the field lives in dimension {d}", cfg.initial.dimension),
        ));
    }
    let s = &cfg.solver;
    s.to_config(s.epsilon)
        .validate()
        .map_err(|e| ConfigError::new(Some("solver".into()), locate_key(text, "solver.epsilon"), e.to_string()))?;

    let e = &cfg.sweep.epsilons;
    if e.len() < 4 {
        return Err(constraint(text, "sweep.epsilons", format!("need at least 4 values, got {}", e.len())));
    }
    if !strictly_decreasing(e) {
        return Err(constraint(text, "sweep.epsilons", "must be positive and strictly decreasing"));
    }
    if e.windows(2).any(|w| w[1] > 0.5 * w[0] * (1.0 + 1e-12)) {
        return Err(constraint(text, "sweep.epsilons", "consecutive values must shrink by at least a factor 2"));
    }
    if cfg.sweep.directions == 0 {
        return Err(constraint(text, "sweep.directions", "must be positive"));
    }
    let r = &cfg.sweep.structure_radii;
    if r.len() < 4 || r.iter().any(|&x| !(x > 0.0 && x < 0.5)) {
        return Err(constraint(text, "sweep.structure_radii", "need at least 4 radii in (0, 1/2)"));
    }

    let p = &cfg.particles;
    if p.epsilons.len() < 3 || !strictly_decreasing(&p.epsilons) {
        return Err(constraint(text, "particles.epsilons", "need at least 3 positive, strictly decreasing values"));
    }
    if p.pair_grid == 0 {
        return Err(constraint(text, "particles.pair_grid", "must be positive"));
    }
    if p.replicas < 2 {
        return Err(constraint(text, "particles.replicas", "must be at least 2"));
    }
    if !(p.rho0 > 0.0 && p.rho0 < 0.5) {
        return Err(constraint(text, "particles.rho0", "must lie in (0, 1/2)"));
    }
    if !(p.dt > 0.0 && p.t_final > 0.0 && p.dt <= p.t_final) {
        return Err(constraint(text, "particles.dt", "need 0 < dt ≤ t_final"));
    }
    if p.dispersion_times.is_empty()
        || p.dispersion_times.windows(2).any(|w| w[1] <= w[0])
        || p.dispersion_times.iter().any(|&t| !(t > 0.0 && t <= p.t_final))
    {
        return Err(constraint(
            text,
            "particles.dispersion_times",
            "must be increasing times in (0, t_final]",
        ));
    }

    let f = &cfg.feynman_kac;
    if !(f.epsilon >= 0.0) {
        return Err(constraint(text, "feynman_kac.epsilon", "must be ≥ 0"));
    }
    if !(f.dt > 0.0 && f.t_final > 0.0 && f.dt <= f.t_final) {
        return Err(constraint(text, "feynman_kac.dt", "need 0 < dt ≤ t_final"));
    }
    if f.n_particles == 0 {
        return Err(constraint(text, "feynman_kac.n_particles", "must be positive"));
    }
    if f.probes.is_empty() || f.probes.iter().any(|x| x.len() != d) {
        return Err(constraint(text, "feynman_kac.probes", format!("need points with {d} coordinates")));
    }
    if !(f.tolerance >= 0.0) {
        return Err(constraint(text, "feynman_kac.tolerance", "must be ≥ 0"));
    }

    let sd = &cfg.sard;
    if sd.rank_bound + 2 > d {
        return Err(constraint(text, "sard.rank_bound", format!("must lie in 0..={} in dimension {d}", d - 2)));
    }
    if let Some(levels) = &sd.levels {
        if levels.len() < 4 || levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(constraint(text, "sard.levels", "need at least 4 strictly increasing levels"));
        }
    }
    if sd.bin_widths.is_empty() || sd.bin_widths.iter().any(|&w| !(w > 0.0 && w < 1.0)) {
        return Err(constraint(text, "sard.bin_widths", "widths must lie in (0, 1)"));
    }
    if let AlphaSource::Fixed(a) = sd.alpha_source {
        if !(a > 0.0 && a <= 1.0) {
            return Err(constraint(text, "sard.alpha_source", "a fixed exponent must lie in (0, 1]"));
        }
    }
    Ok(())
}

/// Serializes a configuration so that [`parse_config`] returns an equal value.
pub fn to_toml(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("configurations serialize to TOML")
}

/// Applies `key=value` overrides (dotted keys, TOML values; bare words are
/// taken as strings) and returns the merged document.
pub fn apply_overrides(text: &str, overrides: &[String]) -> Result<String, ConfigError> {
    if overrides.is_empty() {
        return Ok(text.to_string());
    }
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        ConfigError::new(line.and_then(|l| key_on_line(text, l)), line, e.message().to_string())
    })?;
    for ov in overrides {
        let (key, raw) = ov
            .split_once('=')
            .ok_or_else(|| ConfigError::new(None, None, format!("override `{ov}` is not of the form key=value")))?;
        let key = key.trim();
        let value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
            Ok(mut t) => t.remove("v").expect("parsed table holds v"),
            Err(_) => toml::Value::String(raw.trim().to_string()),
        };
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(ConfigError::new(Some(key.into()), None, "empty path segment in override"));
        }
        let mut table = &mut doc;
        for p in &parts[..parts.len() - 1] {
            let entry = table
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| ConfigError::new(Some(key.into()), None, format!("`{p}` is not a table")))?;
        }
        table.insert(parts[parts.len() - 1].to_string(), value);
    }
    Ok(toml::to_string(&doc).expect("tables serialize to TOML"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_in_tables_and_top_level() {
        let text = "experiment = \"solve\"\n\n[sweep]\nepsilons = [0.1]\n\n[particles]\nepsilons = [1]\n";
        assert_eq!(locate_key(text, "experiment"), Some(1));
        assert_eq!(locate_key(text, "sweep.epsilons"), Some(4));
        assert_eq!(locate_key(text, "particles.epsilons"), Some(7));
    }

    #[test]
    fn experiment_names() {
        for k in ExperimentKind::ALL {
            assert_eq!(ExperimentKind::parse(k.as_str()), Some(k));
        }
        assert_eq!(ExperimentKind::parse("plot"), None);
    }
}
