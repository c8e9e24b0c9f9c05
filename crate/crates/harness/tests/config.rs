use mixlab_core::diagnostics::ResolutionPolicy;
use mixlab_core::lagrangian::NoiseMode;
use mixlab_core::sard::AlphaSource;
use mixlab_core::solver::{InitialKind, TimeStep};
use mixlab_harness::config::{apply_overrides, locate_key, parse_config, to_toml, ExperimentKind, FieldSpec};
use mixlab_harness::derive_seed;
use proptest::prelude::*;

#[test]
fn minimal_document_fills_defaults() {
    let cfg = parse_config("experiment = \"solve\"\n").unwrap();
    assert_eq!(cfg.experiment, ExperimentKind::Solve);
    assert_eq!(cfg.master_seed, 0);
    assert_eq!(cfg.realizations, 1);
    assert_eq!(cfg.output_dir, None);
    match &cfg.field {
        FieldSpec::Gaussian(s) => {
            assert_eq!((s.dimension, s.resolution, s.max_wavenumber), (2, 64, 8));
            assert_eq!(s.alpha_target, Some(0.5));
            assert_eq!(s.amplitude, 0.013);
        }
        other => panic!("unexpected default field {other:?}"),
    }
    assert_eq!(cfg.initial.kind, InitialKind::Checkerboard { cells: 2 });
    assert_eq!(cfg.initial.cutoff, Some(6));
    assert_eq!(cfg.solver.epsilon, 1e-2);
    assert_eq!(cfg.solver.dt, TimeStep::Auto);
    assert_eq!(cfg.solver.t_final, 1.0);
    assert_eq!(cfg.sweep.epsilons.len(), 8);
    assert_eq!(cfg.sweep.epsilons[0], 1.0 / 64.0);
    assert_eq!(*cfg.sweep.epsilons.last().unwrap(), 1.0 / 8192.0);
    assert_eq!(
        cfg.sweep.resolution,
        ResolutionPolicy::Auto {
            margin: 1.0,
            min: 64,
            max: 512
        }
    );
    assert_eq!(cfg.particles.noise_mode, NoiseMode::Shared);
    assert_eq!(cfg.particles.rho0, 1.0 / 16.0);
    assert_eq!(cfg.sard.rank_bound, 0);
    assert_eq!(cfg.sard.alpha_source, AlphaSource::Estimated);
}

#[test]
fn missing_experiment_is_an_error() {
    let e = parse_config("master_seed = 3\n").unwrap_err();
    assert!(e.message.contains("experiment"), "{e}");
}

#[test]
fn duplicate_key_is_named() {
    let e = parse_config("experiment = \"solve\"\nmaster_seed = 1\nmaster_seed = 2\n").unwrap_err();
    assert_eq!(e.key.as_deref(), Some("master_seed"));
    assert_eq!(e.line, Some(3));
    assert!(e.to_string().contains("master_seed"));
}

#[test]
fn unknown_key_is_named_with_its_line() {
    let text = "experiment = \"solve\"\n\n[solver]\nepsilon = 0.02\nepsilonn = 0.01\n";
    let e = parse_config(text).unwrap_err();
    assert_eq!(e.key.as_deref(), Some("epsilonn"));
    assert_eq!(e.line, Some(5));

    let text = "experiment = \"solve\"\n[initial]\ndimension = 2\nkind = \"checkerboard\"\ncells = 2\nfoo = 1\n";
    let e = parse_config(text).unwrap_err();
    assert_eq!(e.key.as_deref(), Some("foo"));
    assert_eq!(e.line, Some(6));
}

#[test]
fn type_mismatch_is_located() {
    let e = parse_config("experiment = \"solve\"\nrealizations = \"two\"\n").unwrap_err();
    assert_eq!(e.line, Some(2));
    assert_eq!(e.key.as_deref(), Some("realizations"));
}

#[test]
fn non_decreasing_epsilons_violate_a_constraint() {
    let text = "experiment = \"sweep_dissipation\"\n[sweep]\nepsilons = [0.01, 0.005, 0.005, 0.001]\n";
    let e = parse_config(text).unwrap_err();
    assert_eq!(e.key.as_deref(), Some("sweep.epsilons"));
    assert_eq!(e.line, Some(3));

    let short = "experiment = \"sweep_dissipation\"\n[sweep]\nepsilons = [0.01, 0.005, 0.002]\n";
    assert!(parse_config(short).is_err());
    let slow = "experiment = \"sweep_dissipation\"\n[sweep]\nepsilons = [0.01, 0.008, 0.004, 0.002]\n";
    assert_eq!(parse_config(slow).unwrap_err().key.as_deref(), Some("sweep.epsilons"));
    let particles = "experiment = \"richardson\"\n[particles]\nepsilons = [0.01, 0.02, 0.001]\n";
    assert_eq!(parse_config(particles).unwrap_err().key.as_deref(), Some("particles.epsilons"));
}

#[test]
fn cross_section_constraints() {
    let seeded = "experiment = \"sample_field\"\n[field]\nsource = \"gaussian\"\ndimension = 2\nresolution = 64\n\
                  max_wavenumber = 8\nalpha_target = 0.5\nseed = 9\n";
    assert_eq!(parse_config(seeded).unwrap_err().key.as_deref(), Some("field.seed"));

    let mismatch = "experiment = \"solve\"\n[field]\nsource = \"named\"\nresolution = 32\n\
                    field = { kind = \"abc\", amplitude = 1.0 }\n";
    let e = parse_config(mismatch).unwrap_err();
    assert_eq!(e.key.as_deref(), Some("initial.dimension"));

    let rank = "experiment = \"boxdim\"\n[sard]\nrank_bound = 1\n";
    assert_eq!(parse_config(rank).unwrap_err().key.as_deref(), Some("sard.rank_bound"));

    let width = "experiment = \"morse_sard\"\n[sard]\nbin_widths = [0.5, 1.5]\n";
    assert_eq!(parse_config(width).unwrap_err().key.as_deref(), Some("sard.bin_widths"));

    let big_seed = format!("experiment = \"solve\"\nmaster_seed = {}\n", i64::MAX);
    assert!(parse_config(&big_seed).is_ok());
}

#[test]
fn overrides_replace_and_create_keys() {
    let text = "experiment = \"solve\"\n[solver]\nepsilon = 0.02\n";
    let merged = apply_overrides(
        text,
        &[
            "solver.epsilon=0.005".to_string(),
            "experiment=yaglom".to_string(),
            "sweep.directions = 32".to_string(),
            "particles.noise_mode=\"independent\"".to_string(),
        ],
    )
    .unwrap();
    let cfg = parse_config(&merged).unwrap();
    assert_eq!(cfg.solver.epsilon, 0.005);
    assert_eq!(cfg.experiment, ExperimentKind::Yaglom);
    assert_eq!(cfg.sweep.directions, 32);
    assert_eq!(cfg.particles.noise_mode, NoiseMode::Independent);

    assert!(apply_overrides(text, &["solver".to_string()]).is_err());
    assert!(apply_overrides(text, &["solver.epsilon.x=1".to_string()]).is_err());
    assert_eq!(apply_overrides(text, &[]).unwrap(), text);
}

#[test]
fn located_keys() {
    let text = "experiment = \"solve\"\n[sweep]\nepsilons = [1]\n[particles]\nepsilons = [2]\n";
    assert_eq!(locate_key(text, "particles.epsilons"), Some(5));
    assert_eq!(locate_key(text, "sweep.epsilons"), Some(3));
    assert_eq!(locate_key(text, "sard.levels"), None);
}

#[test]
fn full_document_round_trips() {
    let text = r#"
experiment = "full_report"
master_seed = 17
realizations = 3
output_dir = "runs/a"

[field]
source = "named"
resolution = 32
field = { kind = "cellular", amplitude = 0.5 }

[initial]
dimension = 2
kind = "spectral"
entries = [{ k = [1, 2], re = 0.5, im = -0.25 }]

[solver]
epsilon = 0.003
dt = 0.001
output_cadence = 0.1

[sweep]
epsilons = [0.01, 0.005, 0.001, 0.0001]
resolution = { policy = "fixed", resolution = 128 }

[feynman_kac]
epsilon = 0.0
probes = [[0.0, 0.5]]

[sard]
levels = [1, 2, 3, 4]
alpha_source = { fixed = 0.5 }
"#;
    let cfg = parse_config(text).unwrap();
    assert_eq!(cfg.sard.alpha_source, AlphaSource::Fixed(0.5));
    assert_eq!(cfg.solver.dt, TimeStep::Fixed(0.001));
    let again = parse_config(&to_toml(&cfg)).unwrap();
    assert_eq!(again, cfg);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn configs_round_trip(
        seed in 0u64..=i64::MAX as u64,
        realizations in 1usize..6,
        eps0 in 1e-4f64..0.5,
        ratios in prop::collection::vec(0.05f64..0.5, 3..7),
        eps in 0.0f64..0.1,
        kind in 0usize..8,
    ) {
        let mut epsilons = vec![eps0];
        for r in &ratios {
            let next = epsilons.last().unwrap() * r;
            epsilons.push(next);
        }
        let list: Vec<String> = epsilons.iter().map(|e| format!("{e:e}")).collect();
        let text = format!(
            "experiment = \"{}\"\nmaster_seed = {seed}\nrealizations = {realizations}\n\
             [solver]\nepsilon = {eps:e}\n[sweep]\nepsilons = [{}]\n",
            ExperimentKind::ALL[kind].as_str(),
            list.join(", ")
        );
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(&cfg.sweep.epsilons, &epsilons);
        let again = parse_config(&to_toml(&cfg)).unwrap();
        prop_assert_eq!(again, cfg);
    }

    #[test]
    fn seeds_depend_on_every_label(master in any::<u64>(), r in 0usize..1000) {
        let k = ExperimentKind::Richardson;
        let s = derive_seed(master, k, r, "particles");
        prop_assert_eq!(s, derive_seed(master, k, r, "particles"));
        prop_assert_ne!(s, derive_seed(master, k, r + 1, "particles"));
        prop_assert_ne!(s, derive_seed(master, k, r, "field"));
        prop_assert_ne!(s, derive_seed(master.wrapping_add(1), k, r, "particles"));
    }
}
