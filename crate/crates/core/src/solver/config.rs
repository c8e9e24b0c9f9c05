use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Time step: chosen from the CFL and stiffness limits, or fixed.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum TimeStep {
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for TimeStep {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TimeStep::Auto => s.serialize_str("auto"),
            TimeStep::Fixed(dt) => s.serialize_f64(*dt),
        }
    }
}

impl<'de> Deserialize<'de> for TimeStep {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) if t == "auto" => Ok(TimeStep::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "dt must be a number or \"auto\", got \"{t}\""
            ))),
            Raw::Number(x) => Ok(TimeStep::Fixed(x)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub epsilon: f64,
    #[serde(default)]
    pub dt: TimeStep,
    pub t_final: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default = "default_true")]
    pub dealias: bool,
    /// Time between ledger samples; defaults to t_final/32.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_cadence: Option<f64>,
    /// Upper bound on ε|2πk_max|²·dt for automatic steps.
    #[serde(default = "default_diffusion_number")]
    pub max_diffusion_number: f64,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

fn default_diffusion_number() -> f64 {
    1.5
}

pub const DEFAULT_LEDGER_SAMPLES: usize = 32;

impl SolverConfig {
    pub fn new(epsilon: f64, t_final: f64) -> Self {
        SolverConfig {
            epsilon,
            dt: TimeStep::Auto,
            t_final,
            cfl_safety: default_cfl(),
            dealias: true,
            output_cadence: None,
            max_diffusion_number: default_diffusion_number(),
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = TimeStep::Fixed(dt);
        self
    }

    pub fn cadence(&self) -> f64 {
        self.output_cadence
            .unwrap_or(self.t_final / DEFAULT_LEDGER_SAMPLES as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be ≥ 0, got {}", self.epsilon)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("t_final must be > 0, got {}", self.t_final)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Config(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config(format!("dt must be > 0, got {dt}")));
            }
        }
        if let Some(c) = self.output_cadence {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("output_cadence must be > 0, got {c}")));
            }
        }
        if !(self.max_diffusion_number > 0.0) {
            return Err(Error::Config("max_diffusion_number must be > 0".into()));
        }
        Ok(())
    }
}
