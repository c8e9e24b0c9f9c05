use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;

use mixlab_harness::config::parse_config;
use mixlab_harness::run::write_manifest;
use mixlab_harness::{
    run_experiment, write_outputs, ExperimentKind, RunManifest, EXIT_CONFIG, EXIT_OK, EXIT_REFUSAL, MANIFEST_NAME,
};
use sha2::{Digest, Sha256};

const HEAT: &str = r#"
experiment = "sweep_dissipation"
master_seed = 5

[field]
source = "named"
resolution = 64
field = { kind = "zero", dimension = 2 }

[initial]
dimension = 2
kind = "single_mode"
k = [1, 0]

[sweep]
epsilons = [0.015625, 0.0078125, 0.00390625, 0.001953125]
"#;

/// Gaussian field with every stage trimmed to a few seconds.
const SMALL_GAUSSIAN: &str = r#"
experiment = "full_report"
master_seed = 11

[sweep]
epsilons = [0.015625, 0.0078125, 0.00390625, 0.001953125]

[particles]
epsilons = [0.01, 0.0025, 0.000625]
replicas = 8
dt = 0.004

[feynman_kac]
n_particles = 400
dt = 0.005
"#;

fn read_csv(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn digests(m: &RunManifest) -> BTreeMap<String, String> {
    m.outputs.iter().map(|o| (o.path.clone(), o.sha256.clone())).collect()
}

#[test]
fn heat_sweep_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(HEAT).unwrap();
    let m = run_experiment(&cfg, dir.path(), 2).unwrap();
    assert_eq!(m.status, "ok", "{:?}", m.failures);
    assert!(m.outputs.iter().any(|o| o.path == "sweep.csv"));

    let (header, rows) = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(header, "epsilon,dissipation,variance_deficit");
    assert_eq!(rows.len(), 4);
    for row in rows {
        let eps: f64 = row[0].parse().unwrap();
        let d: f64 = row[1].parse().unwrap();
        let deficit: f64 = row[2].parse().unwrap();
        // ∫sin² = ½ decays as ½e^{−8π²εt}; half the loss is dissipated
        let exact = (1.0 - (-8.0 * PI * PI * eps).exp()) / 4.0;
        assert!((d - exact).abs() <= 1e-6 * exact, "ε = {eps}: {d} vs {exact}");
        assert!((deficit - 2.0 * exact).abs() <= 2e-6 * exact);
    }
}

#[test]
fn digests_match_files_and_config_echo_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(HEAT).unwrap();
    let m = run_experiment(&cfg, dir.path(), 1).unwrap();
    for o in &m.outputs {
        let bytes = fs::read(dir.path().join(&o.path)).unwrap();
        assert_eq!(bytes.len() as u64, o.bytes);
        assert_eq!(hex::encode(Sha256::digest(&bytes)), o.sha256);
    }
    assert_eq!(parse_config(&m.config).unwrap(), cfg);
    let on_disk: RunManifest =
        serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap()).unwrap();
    assert_eq!(on_disk, m);
    assert_eq!(m.seeds.len(), 1);
    assert_eq!(m.seeds[0].seed, mixlab_harness::derive_seed(5, ExperimentKind::SweepDissipation, 0, "field"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = parse_config(SMALL_GAUSSIAN).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run_experiment(&cfg, a.path(), 1).unwrap();
    let mb = run_experiment(&cfg, b.path(), 3).unwrap();
    assert_eq!(ma.status, "ok", "{:?}", ma.failures);
    assert_eq!(digests(&ma), digests(&mb));
    assert_eq!(ma.seeds, mb.seeds);
}

#[test]
fn full_report_emits_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(SMALL_GAUSSIAN).unwrap();
    let m = run_experiment(&cfg, dir.path(), 0).unwrap();
    assert_eq!(m.status, "ok", "{:?}", m.failures);
    let expected = [
        ("field_summary.csv", "key,value"),
        ("ledger.csv", "time,variance,dissipation_cumulative,balance_residual"),
        ("sweep.csv", "epsilon,dissipation,variance_deficit"),
        ("yaglom.csv", "r,mean_S,mean_S_over_r"),
        ("structure.csv", "epsilon,r,S2"),
        ("structure_exponents.csv", "epsilon,resolution,exponent,exponent_se"),
        ("richardson.csv", "epsilon,cell,mean_d2,sem,deterministic_d2"),
        ("dispersion.csv", "t,mean_d2,sem"),
        ("feynman_kac.csv", "x,mc,spectral,sem"),
        ("boxcount.csv", "level,count"),
        ("image_boxcount.csv", "level,count"),
        ("weak_sard.csv", "bin_width,total_mass,max_bin_mass,z_fraction"),
        ("critical_values.csv", "bin_width,measure"),
    ];
    for (name, header) in expected {
        assert!(m.outputs.iter().any(|o| o.path == name), "{name} missing from manifest");
        assert_eq!(read_csv(&dir.path().join(name)).0, header, "{name}");
    }
    for bin in ["velocity.bin", "potential.bin", "final.bin"] {
        assert!(dir.path().join(bin).exists());
    }
    let stages: Vec<&str> = m.stages.iter().map(|s| s.stage.as_str()).collect();
    for s in ["sample_field", "solve", "sweep_dissipation", "yaglom", "richardson", "dispersion", "feynman_kac", "boxdim", "morse_sard"] {
        assert!(stages.contains(&s), "stage {s} not recorded");
    }
}

#[test]
fn empty_result_set_writes_only_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let inventory = write_outputs(&[], dir.path()).unwrap();
    assert!(inventory.is_empty());
    let m = RunManifest {
        software: "mixlab-harness".into(),
        version: "0".into(),
        experiment: ExperimentKind::Solve,
        master_seed: 0,
        config: String::new(),
        seeds: vec![],
        stages: vec![],
        outputs: inventory,
        failures: vec![],
        status: "ok".into(),
    };
    write_manifest(&m, dir.path()).unwrap();
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec![MANIFEST_NAME.to_string()]);
}

#[test]
fn serialization_digests_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    let files = vec![("a.csv".to_string(), b"x,y\n1,2\n".to_vec())];
    let first = write_outputs(&files, dir.path()).unwrap();
    let second = write_outputs(&files, dir.path()).unwrap();
    assert_eq!(first, second);
    assert_eq!(first[0].sha256, hex::encode(Sha256::digest(b"x,y\n1,2\n")));
}

#[test]
fn failing_stage_keeps_completed_outputs() {
    // critical-set stages need a sampled potential, which a named field lacks
    let text = "experiment = \"morse_sard\"\n[field]\nsource = \"named\"\nresolution = 32\n\
                field = { kind = \"cellular\", amplitude = 1.0 }\n";
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&parse_config(text).unwrap(), dir.path(), 1).unwrap();
    assert_eq!(m.status, "failed");
    assert_eq!(m.failures.len(), 1);
    assert_eq!(m.failures[0].stage, "morse_sard");
    assert_eq!(m.exit_code(), EXIT_CONFIG);
    assert!(m.outputs.iter().any(|o| o.path == "velocity.bin"));
    assert!(dir.path().join("field_summary.csv").exists());
    assert!(!dir.path().join("weak_sard.csv").exists());
}

#[test]
fn realizations_get_their_own_files_and_seeds() {
    let text = "experiment = \"sample_field\"\nrealizations = 2\nmaster_seed = 4\n";
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&parse_config(text).unwrap(), dir.path(), 2).unwrap();
    assert_eq!(m.status, "ok");
    for r in 0..2 {
        assert!(dir.path().join(format!("velocity_r{r}.bin")).exists());
        assert!(dir.path().join(format!("field_summary_r{r}.csv")).exists());
    }
    assert_ne!(m.seeds[0].seed, m.seeds[1].seed);
    let d = digests(&m);
    assert_ne!(d["velocity_r0.bin"], d["velocity_r1.bin"]);
}

fn mixlab(args: &[&str], env_out: Option<&Path>) -> (i32, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mixlab"));
    cmd.args(args).env_remove("MIXLAB_OUT");
    if let Some(p) = env_out {
        cmd.env("MIXLAB_OUT", p);
    }
    let out = cmd.output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn cli_exit_codes_and_output_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "experiment = \"solve\"\n[solver]\nt_final = 0.1\n").unwrap();
    let c = cfg.to_str().unwrap();

    let out = dir.path().join("flag");
    let (code, err) = mixlab(&["run", "--config", c, "--out", out.to_str().unwrap(), "--workers", "1"], None);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.join("ledger.csv").exists());

    let env_out = dir.path().join("env");
    let (code, _) = mixlab(&["sample-field", "--config", c, "--seed", "3"], Some(&env_out));
    assert_eq!(code, EXIT_OK);
    let m: RunManifest = serde_json::from_str(&fs::read_to_string(env_out.join(MANIFEST_NAME)).unwrap()).unwrap();
    assert_eq!(m.experiment, ExperimentKind::SampleField);
    assert_eq!(m.master_seed, 3);

    let (code, err) = mixlab(&["solve", "--config", c, "--override", "solver.epsilonn=1"], Some(&env_out));
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("epsilonn"), "{err}");

    let refuse = dir.path().join("refuse");
    let (code, err) = mixlab(
        &["solve", "--config", c, "--override", "solver.epsilon=1e-9", "--out", refuse.to_str().unwrap()],
        None,
    );
    assert_eq!(code, EXIT_REFUSAL, "{err}");
    assert!(refuse.join(MANIFEST_NAME).exists());

    let (code, _) = mixlab(&["run", "--config", dir.path().join("missing.toml").to_str().unwrap()], None);
    assert_eq!(code, mixlab_harness::EXIT_RUNTIME);
}
