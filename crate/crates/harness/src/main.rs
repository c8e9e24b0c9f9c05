use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mixlab_harness::config::{apply_overrides, parse_config, ExperimentKind};
use mixlab_harness::error::{HarnessError, EXIT_CONFIG};
use mixlab_harness::{run_experiment, ConfigError};

const DEFAULT_OUT: &str = "mixlab-out";

#[derive(Parser)]
#[command(name = "mixlab", version, about = "Passive-scalar mixing experiments on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the experiment named in the configuration file.
    Run(Common),
    /// Samples the velocity field and its summary.
    SampleField(Common),
    /// Solves once at solver.epsilon.
    Solve(Common),
    /// Dissipation sweep over sweep.epsilons.
    SweepDissipation(Common),
    /// Dissipation sweep followed by the Yaglom ratio.
    Yaglom(Common),
    /// Pair dispersion and the Feynman–Kac check.
    Richardson(Common),
    /// Critical-set box counting.
    Boxdim(Common),
    /// Critical-value measures.
    MorseSard(Common),
    /// Every stage.
    FullReport(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "MIXLAB_OUT")]
    out: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all available cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// key=value assignment applied to the configuration (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn split(cmd: Command) -> (Option<ExperimentKind>, Common) {
    use ExperimentKind as K;
    match cmd {
        Command::Run(c) => (None, c),
        Command::SampleField(c) => (Some(K::SampleField), c),
        Command::Solve(c) => (Some(K::Solve), c),
        Command::SweepDissipation(c) => (Some(K::SweepDissipation), c),
        Command::Yaglom(c) => (Some(K::Yaglom), c),
        Command::Richardson(c) => (Some(K::Richardson), c),
        Command::Boxdim(c) => (Some(K::Boxdim), c),
        Command::MorseSard(c) => (Some(K::MorseSard), c),
        Command::FullReport(c) => (Some(K::FullReport), c),
    }
}

fn execute(cli: Cli) -> Result<i32, HarnessError> {
    let (kind, common) = split(cli.command);
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?,
        None => String::new(),
    };
    let mut overrides = common.overrides.clone();
    if let Some(k) = kind {
        overrides.push(format!("experiment=\"{}\"", k.as_str()));
    } else if common.config.is_none() {
        return Err(ConfigError::new(None, None, "`run` needs --config").into());
    }
    if let Some(s) = common.seed {
        overrides.push(format!("master_seed={s}"));
    }
    let merged = apply_overrides(&text, &overrides)?;
    let cfg = parse_config(&merged)?;
    let out = common
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    log::info!("running {} into {}", cfg.experiment.as_str(), out.display());
    let manifest = run_experiment(&cfg, &out, common.workers)?;
    for f in &manifest.failures {
        eprintln!("realization {} stage {}: {}", f.realization, f.stage, f.message);
    }
    println!("{}", out.join(mixlab_harness::MANIFEST_NAME).display());
    Ok(manifest.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, HarnessError::Config(_)) {
                EXIT_CONFIG
            } else {
                e.exit_code()
            }
        }
    };
    ExitCode::from(code as u8)
}
