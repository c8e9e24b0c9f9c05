//! Configuration, orchestration and result emission for mixlab experiments.

pub mod config;
pub mod error;
pub mod run;
pub mod seeds;

pub use config::{apply_overrides, parse_config, to_toml, ExperimentConfig, ExperimentKind, FieldSpec};
pub use error::{ConfigError, HarnessError, EXIT_CONFIG, EXIT_OK, EXIT_REFUSAL, EXIT_RUNTIME};
pub use run::{run_experiment, write_manifest, write_outputs, RunManifest, MANIFEST_NAME};
pub use seeds::derive_seed;
