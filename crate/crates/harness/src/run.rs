//! Experiment orchestration and result emission.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use mixlab_core::diagnostics::{epsilon_sweep, minimal_resolution, structure_function_exponent_with, yaglom_ratio_curve, SweepConfig, SweepRun};
use mixlab_core::fields::{
    divergence_residual, holder_estimate, sample_clebsch_3d, sample_stream_2d, velocity_from_clebsch,
    velocity_from_stream,
};
use mixlab_core::io::encode_field;
use mixlab_core::lagrangian::{
    dispersion_curve, feynman_kac_check, pair_grid_positions, richardson_sweep, richardson_verdict, ParticleEnsemble,
    RichardsonConfig, SdeConfig,
};
use mixlab_core::sard::{
    box_count_curve, critical_value_measure, finest_level, image_dimension_estimate, jet_grid, orthogonality_residual,
    weak_sard_proxy, RankVarietyProbe,
};
use mixlab_core::solver::{initialize, solve};
use mixlab_core::GridField;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{to_toml, ExperimentConfig, ExperimentKind, FieldSpec};
use crate::error::{HarnessError, Result, EXIT_OK};
use crate::seeds::{derive_seed, sha256_hex};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub realization: usize,
    pub role: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub realization: usize,
    pub stage: String,
    pub wall_seconds: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub realization: usize,
    pub stage: String,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub experiment: ExperimentKind,
    pub master_seed: u64,
    /// The configuration as TOML; reparses to the run's config.
    pub config: String,
    pub seeds: Vec<SeedRecord>,
    pub stages: Vec<StageRecord>,
    pub outputs: Vec<OutputRecord>,
    pub failures: Vec<FailureRecord>,
    pub status: String,
}

impl RunManifest {
    /// Exit code of the first failure, or 0.
    pub fn exit_code(&self) -> i32 {
        self.failures.first().map_or(EXIT_OK, |f| f.exit_code)
    }
}

/// Writes named files into `dir` and returns their inventory.
pub fn write_outputs(files: &[(String, Vec<u8>)], dir: &Path) -> Result<Vec<OutputRecord>> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    files
        .iter()
        .map(|(name, bytes)| {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| HarnessError::io(&path, e))?;
            Ok(OutputRecord {
                path: name.clone(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
            })
        })
        .collect()
}

pub fn write_manifest(manifest: &RunManifest, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let path = dir.join(MANIFEST_NAME);
    let json = serde_json::to_string_pretty(manifest).expect("manifests serialize");
    fs::write(&path, json + "\n").map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

fn key_value_csv(rows: &[(&str, String)]) -> Vec<u8> {
    let mut s = String::from("key,value\n");
    for (k, v) in rows {
        s.push_str(&format!("{k},{v}\n"));
    }
    s.into_bytes()
}

/// Sampled velocity with the potential it came from, if any.
struct Flow {
    velocity: GridField,
    potential: Option<GridField>,
}

/// Per-realization state shared by the stages.
struct Cell<'a> {
    cfg: &'a ExperimentConfig,
    realization: usize,
    dir: &'a Path,
    outputs: &'a Mutex<Vec<OutputRecord>>,
    stages: &'a Mutex<Vec<StageRecord>>,
    failures: &'a Mutex<Vec<FailureRecord>>,
}

impl Cell<'_> {
    fn name(&self, stem: &str, ext: &str) -> String {
        if self.cfg.realizations > 1 {
            format!("{stem}_r{}.{ext}", self.realization)
        } else {
            format!("{stem}.{ext}")
        }
    }

    fn seed(&self, role: &str) -> u64 {
        derive_seed(self.cfg.master_seed, self.cfg.experiment, self.realization, role)
    }

    /// Runs one stage; its files are written as soon as it succeeds.
    fn stage<T>(&self, stage: &str, f: impl FnOnce() -> Result<(T, Vec<(String, Vec<u8>)>)>) -> Option<T> {
        let start = Instant::now();
        let result = f().and_then(|(value, files)| {
            let recs = write_outputs(&files, self.dir)?;
            self.outputs.lock().unwrap().extend(recs);
            Ok(value)
        });
        let ok = result.is_ok();
        self.stages.lock().unwrap().push(StageRecord {
            realization: self.realization,
            stage: stage.to_string(),
            wall_seconds: start.elapsed().as_secs_f64(),
            ok,
        });
        match result {
            Ok(v) => Some(v),
            Err(e) => {
                log::error!("realization {} stage {stage}: {e}", self.realization);
                self.failures.lock().unwrap().push(FailureRecord {
                    realization: self.realization,
                    stage: stage.to_string(),
                    message: e.to_string(),
                    exit_code: e.exit_code(),
                });
                None
            }
        }
    }

    fn sample_field(&self) -> Option<Flow> {
        self.stage("sample_field", || {
            let flow = match &self.cfg.field {
                FieldSpec::Gaussian(spec) => {
                    let mut spec = spec.clone();
                    spec.seed = self.seed("field");
                    if spec.dimension == 2 {
                        let phi = sample_stream_2d(&spec)?;
                        Flow {
                            velocity: velocity_from_stream(&phi)?,
                            potential: Some(phi),
                        }
                    } else {
                        let pots = sample_clebsch_3d(&spec)?;
                        Flow {
                            velocity: velocity_from_clebsch(&pots)?.velocity,
                            potential: Some(pots.stack()),
                        }
                    }
                }
                FieldSpec::Named { field, resolution } => Flow {
                    velocity: field.sample(*resolution)?,
                    potential: None,
                },
            };
            let v = &flow.velocity;
            let mut rows = vec![
                ("dimension", v.dimension().to_string()),
                ("resolution", v.resolution().to_string()),
                ("velocity_max_abs", v.max_abs().to_string()),
                ("velocity_mean_square", v.mean_square().to_string()),
                ("divergence_residual", divergence_residual(v)?.to_string()),
            ];
            let mut files = vec![(self.name("velocity", "bin"), encode_field(v))];
            if let Some(phi) = &flow.potential {
                // undefined for fields that are too smooth or too coarse
                let alpha = holder_estimate(phi, 1).map_or("nan".to_string(), |h| h.alpha.to_string());
                rows.push(("potential_holder_alpha", alpha));
                files.push((self.name("potential", "bin"), encode_field(phi)));
            }
            files.push((self.name("field_summary", "csv"), key_value_csv(&rows)));
            Ok((flow, files))
        })
    }

    fn solve(&self, v: &GridField) {
        self.stage("solve", || {
            let cfg = self.cfg.solver.to_config(self.cfg.solver.epsilon);
            let n = v.resolution();
            if cfg.epsilon > 0.0 {
                let minimal = minimal_resolution(cfg.epsilon, cfg.t_final, 1.0);
                if minimal > n {
                    return Err(mixlab_core::Error::Unresolved {
                        epsilon: cfg.epsilon,
                        resolution: n,
                        minimal_resolution: minimal,
                    }
                    .into());
                }
            }
            let state = initialize(&self.cfg.initial, n)?;
            let (fin, ledger) = solve(&state, v, &cfg)?;
            let last = |x: &[f64]| x.last().copied().unwrap_or(0.0);
            let rows = [
                ("epsilon", cfg.epsilon.to_string()),
                ("resolution", ledger.resolution.to_string()),
                ("dt", ledger.dt.to_string()),
                ("steps", ledger.steps.to_string()),
                ("final_dissipation", ledger.final_dissipation().to_string()),
                ("final_variance", last(&ledger.variance).to_string()),
                (
                    "max_abs_balance_residual",
                    ledger.balance_residual.iter().fold(0.0f64, |m, r| m.max(r.abs())).to_string(),
                ),
                ("truncation_loss", ledger.truncation_loss.to_string()),
            ];
            let files = vec![
                (self.name("ledger", "csv"), ledger.to_csv().into_bytes()),
                (self.name("final", "bin"), encode_field(&fin.theta)),
                (self.name("solve_summary", "csv"), key_value_csv(&rows)),
            ];
            Ok(((), files))
        });
    }

    fn sweep(&self, v: &GridField) -> Option<Vec<SweepRun>> {
        self.stage("sweep_dissipation", || {
            let s = &self.cfg.sweep;
            let cfg = SweepConfig {
                epsilons: s.epsilons.clone(),
                solver: self.cfg.solver.to_config(s.epsilons[0]),
                resolution: s.resolution.clone(),
                thresholds: s.thresholds.clone(),
            };
            let (result, runs) = epsilon_sweep(v, &self.cfg.initial, &cfg)?;
            let res: Vec<String> = result.resolutions.iter().map(|n| n.to_string()).collect();
            let rows = [
                ("verdict", result.verdict.as_str().to_string()),
                ("initial_variance", result.initial_variance.to_string()),
                ("fit_slope", result.fit_slope.to_string()),
                ("asymptotic_slope", result.asymptotic_slope.to_string()),
                (
                    "dissipation_ratio",
                    (result.dissipation.last().unwrap() / result.dissipation[0]).to_string(),
                ),
                (
                    "max_abs_balance_residual",
                    result.balance_residuals.iter().fold(0.0f64, |m, r| m.max(r.abs())).to_string(),
                ),
                ("resolutions", res.join(" ")),
            ];
            let mut curve = String::from("epsilon,r,S2\n");
            let mut exps = String::from("epsilon,resolution,exponent,exponent_se\n");
            for run in &runs {
                let sc = structure_function_exponent_with(&run.state.theta, &s.structure_radii, s.directions)?;
                for (r, v) in sc.radii.iter().zip(&sc.s2) {
                    curve.push_str(&format!("{},{r},{v}\n", run.epsilon));
                }
                exps.push_str(&format!("{},{},{},{}\n", run.epsilon, run.resolution, sc.exponent, sc.exponent_se));
            }
            let files = vec![
                (self.name("sweep", "csv"), result.to_csv().into_bytes()),
                (self.name("sweep_summary", "csv"), key_value_csv(&rows)),
                (self.name("structure", "csv"), curve.into_bytes()),
                (self.name("structure_exponents", "csv"), exps.into_bytes()),
            ];
            Ok((runs, files))
        })
    }

    fn yaglom(&self, runs: &[SweepRun], v: &GridField) {
        self.stage("yaglom", || {
            let y = yaglom_ratio_curve(runs, v, self.cfg.sweep.directions)?;
            let rows = [("decrease_factor", y.decrease_factor.to_string())];
            let files = vec![
                (self.name("yaglom", "csv"), y.to_csv().into_bytes()),
                (self.name("yaglom_summary", "csv"), key_value_csv(&rows)),
            ];
            Ok(((), files))
        });
    }

    fn richardson(&self, v: &GridField) {
        let p = &self.cfg.particles;
        let seed = self.seed("particles");
        self.stage("richardson", || {
            let rc = RichardsonConfig {
                epsilons: p.epsilons.clone(),
                pair_grid: p.pair_grid,
                rho0: p.rho0,
                replicas: p.replicas,
                dt: p.dt,
                t_final: p.t_final,
                noise_mode: p.noise_mode,
                seed,
            };
            let data = richardson_sweep(v, &rc)?;
            let report = richardson_verdict(&data)?;
            let rows = [
                ("verdict", report.verdict.as_str().to_string()),
                ("persistent_fraction", report.persistent_fraction.to_string()),
                ("fitted_delta", report.fitted_delta.to_string()),
            ];
            let files = vec![
                (self.name("richardson", "csv"), data.to_csv().into_bytes()),
                (self.name("richardson_summary", "csv"), key_value_csv(&rows)),
            ];
            Ok(((), files))
        });
        self.stage("dispersion", || {
            let d = v.dimension();
            let pos = pair_grid_positions(d, p.pair_grid, p.rho0);
            let pairs: Vec<(usize, usize)> = (0..pos.len() / (2 * d)).map(|c| (2 * c, 2 * c + 1)).collect();
            let ens = ParticleEnsemble::new(d, pos, p.noise_mode, seed)?;
            let sde = SdeConfig {
                epsilon: *p.epsilons.last().unwrap(),
                dt: p.dt,
                t_final: p.t_final,
                n_particles: ens.len(),
                noise_mode: p.noise_mode,
                seed,
            };
            let (curve, _) = dispersion_curve(&ens, v, &sde, &pairs, &p.dispersion_times)?;
            Ok(((), vec![(self.name("dispersion", "csv"), curve.to_csv().into_bytes())]))
        });
        self.stage("feynman_kac", || {
            let f = &self.cfg.feynman_kac;
            let sde = SdeConfig {
                epsilon: f.epsilon,
                dt: f.dt,
                t_final: f.t_final,
                n_particles: f.n_particles,
                noise_mode: Default::default(),
                seed: self.seed("feynman_kac"),
            };
            let report = feynman_kac_check(v, &self.cfg.initial, &sde, &f.probes, f.tolerance)?;
            let rows = [
                ("max_error", report.max_error.to_string()),
                ("bound", report.bound.to_string()),
                ("passed", report.passed.to_string()),
            ];
            let files = vec![
                (self.name("feynman_kac", "csv"), report.to_csv().into_bytes()),
                (self.name("feynman_kac_summary", "csv"), key_value_csv(&rows)),
            ];
            Ok(((), files))
        });
    }

    fn probe(&self, flow: &Flow) -> Result<(mixlab_core::sard::GridJet, RankVarietyProbe)> {
        let phi = flow.potential.as_ref().ok_or_else(|| {
            HarnessError::Core(mixlab_core::Error::Config(
                "critical-set stages need a sampled potential (field.source = \"gaussian\")".into(),
            ))
        })?;
        let jet = jet_grid(phi)?;
        let probe = RankVarietyProbe::from_jet(&jet, self.cfg.sard.rank_bound, self.cfg.sard.alpha_source)?;
        Ok((jet, probe))
    }

    fn levels(&self, n: usize) -> Result<Vec<u32>> {
        match &self.cfg.sard.levels {
            Some(l) => Ok(l.clone()),
            None => Ok((1..=finest_level(n)?).collect()),
        }
    }

    fn boxdim(&self, flow: &Flow) {
        self.stage("boxdim", || {
            let (jet, probe) = self.probe(flow)?;
            let levels = self.levels(jet.resolution())?;
            let curve = box_count_curve(&jet, &probe, &levels)?;
            let image = image_dimension_estimate(&jet, &probe, &levels)?;
            let mut rows = vec![
                ("holder_alpha", probe.holder_alpha.to_string()),
                ("holder_norm", probe.holder_norm.to_string()),
                ("rank_bound", probe.rank_bound.to_string()),
                ("fitted_dim", curve.fitted_dim.to_string()),
                ("fit_se", curve.fit_se.to_string()),
                ("theory_bound", curve.theory_bound.to_string()),
                ("empty_set", curve.empty_set.to_string()),
                ("exceeds_bound", curve.exceeds_bound.to_string()),
                ("image_fitted_dim", image.fitted_dim.to_string()),
                ("image_bound", image.bound.to_string()),
                ("image_exceeds_bound", image.exceeds_bound.to_string()),
            ];
            if jet.dimension() == 3 {
                rows.push(("orthogonality_residual", orthogonality_residual(&jet, &flow.velocity)?.to_string()));
            }
            let files = vec![
                (self.name("boxcount", "csv"), curve.to_csv().into_bytes()),
                (self.name("image_boxcount", "csv"), image.to_csv().into_bytes()),
                (self.name("boxdim_summary", "csv"), key_value_csv(&rows)),
            ];
            Ok(((), files))
        });
    }

    fn morse_sard(&self, flow: &Flow) {
        self.stage("morse_sard", || {
            let (jet, probe) = self.probe(flow)?;
            let widths = &self.cfg.sard.bin_widths;
            let weak = weak_sard_proxy(&jet, &probe, widths)?;
            let mut cv = String::from("bin_width,measure\n");
            for &w in widths {
                cv.push_str(&format!("{w},{}\n", critical_value_measure(&jet, &probe, w)?));
            }
            let rate = weak.measure_rate.map_or("nan".to_string(), |r| r.to_string());
            let rows = [
                ("holder_alpha", probe.holder_alpha.to_string()),
                ("measure_rate", rate),
                ("atom_detected", weak.atom_detected.to_string()),
            ];
            let files = vec![
                (self.name("weak_sard", "csv"), weak.to_csv().into_bytes()),
                (self.name("critical_values", "csv"), cv.into_bytes()),
                (self.name("morse_sard_summary", "csv"), key_value_csv(&rows)),
            ];
            Ok(((), files))
        });
    }

    fn run(&self) {
        use ExperimentKind::*;
        let kind = self.cfg.experiment;
        let Some(flow) = self.sample_field() else { return };
        let v = &flow.velocity;
        if matches!(kind, Solve | FullReport) {
            self.solve(v);
        }
        if matches!(kind, SweepDissipation | Yaglom | FullReport) {
            let runs = self.sweep(v);
            if matches!(kind, Yaglom | FullReport) {
                match runs {
                    Some(runs) => self.yaglom(&runs, v),
                    None => log::warn!("realization {}: yaglom skipped after sweep failure", self.realization),
                }
            }
        }
        if matches!(kind, Richardson | FullReport) {
            self.richardson(v);
        }
        if matches!(kind, Boxdim | FullReport) {
            self.boxdim(&flow);
        }
        if matches!(kind, MorseSard | FullReport) {
            self.morse_sard(&flow);
        }
    }
}

fn roles(kind: ExperimentKind) -> Vec<&'static str> {
    use ExperimentKind::*;
    let mut r = vec!["field"];
    if matches!(kind, Richardson | FullReport) {
        r.extend(["particles", "feynman_kac"]);
    }
    r
}

/// Runs the configured pipeline on a pool of `workers` threads (0 means
/// available parallelism) and writes every output plus `manifest.json`
/// into `out`. Stage failures are recorded in the manifest; the error
/// result is reserved for the pool and manifest I/O.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, workers: usize) -> Result<RunManifest> {
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Core(mixlab_core::Error::Config(format!("worker pool: {e}"))))?;

    let outputs = Mutex::new(Vec::new());
    let stages = Mutex::new(Vec::new());
    let failures = Mutex::new(Vec::new());
    pool.install(|| {
        (0..cfg.realizations).into_par_iter().for_each(|realization| {
            Cell {
                cfg,
                realization,
                dir: out,
                outputs: &outputs,
                stages: &stages,
                failures: &failures,
            }
            .run()
        })
    });

    let mut seeds = Vec::new();
    for r in 0..cfg.realizations {
        for role in roles(cfg.experiment) {
            seeds.push(SeedRecord {
                realization: r,
                role: role.to_string(),
                seed: derive_seed(cfg.master_seed, cfg.experiment, r, role),
            });
        }
    }
    let mut outputs = outputs.into_inner().unwrap();
    outputs.sort_by(|a, b| a.path.cmp(&b.path));
    let mut stages = stages.into_inner().unwrap();
    stages.sort_by(|a, b| (a.realization, &a.stage).cmp(&(b.realization, &b.stage)));
    let mut failures = failures.into_inner().unwrap();
    failures.sort_by(|a, b| (a.realization, &a.stage).cmp(&(b.realization, &b.stage)));

    let manifest = RunManifest {
        software: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment,
        master_seed: cfg.master_seed,
        config: to_toml(cfg),
        seeds,
        stages,
        outputs,
        status: if failures.is_empty() { "ok" } else { "failed" }.to_string(),
        failures,
    };
    write_manifest(&manifest, out)?;
    Ok(manifest)
}
