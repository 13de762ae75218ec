//! Experiment configuration, stored as versioned JSON.

use std::path::Path;

use coadapt_core::learner::{init_circle_8, init_random_ball, BallSampling};
use coadapt_core::protocol::TrialTiming;
use coadapt_core::{Dims, Estimate, LearnerConfig, Matrix, UpdateMode};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Default agreement required between client-reported and recomputed values.
pub const DEFAULT_VALIDATION_TOLERANCE: f64 = 1e-9;

/// Circle radius as a function of cost: `min(r_min + gain * c, r_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisplayScaling {
    pub r_min: f64,
    pub gain: f64,
    pub r_max: f64,
}

impl Default for DisplayScaling {
    fn default() -> Self {
        Self {
            r_min: 0.02,
            gain: 0.5,
            r_max: 1.0,
        }
    }
}

impl DisplayScaling {
    pub fn radius(&self, cost: f64) -> f64 {
        (self.r_min + self.gain * cost).min(self.r_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitScheme {
    /// Session `n` starts at point `n mod 8` of the circle.
    Circle8 { radius: f64 },
    /// Session `n` draws from the ball with seed `seed + n`.
    Ball { radius: f64, sampling: BallSampling },
    Fixed { estimate: Estimate },
}

impl InitScheme {
    pub fn estimate(&self, dims: Dims, seed: u64, session: u64) -> Result<Estimate> {
        let e = match self {
            InitScheme::Circle8 { radius } => {
                if dims.state_len() != 2 {
                    return Err(Error::Config(format!("circle inits need a 1x1 game, not {dims}")));
                }
                init_circle_8(*radius)?[(session % 8) as usize].clone()
            }
            InitScheme::Ball { radius, sampling } => {
                init_random_ball(dims, *radius, *sampling, seed.wrapping_add(session))?
            }
            InitScheme::Fixed { estimate } => estimate.clone(),
        };
        e.check(dims)?;
        Ok(e)
    }
}

fn default_true() -> bool {
    true
}

fn default_one() -> f64 {
    1.0
}

fn default_iterations() -> usize {
    10
}

fn default_tolerance() -> f64 {
    DEFAULT_VALIDATION_TOLERANCE
}

fn default_countdown() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment_id: String,
    pub dims: Dims,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Zero when absent.
    #[serde(default)]
    pub base_gain: Option<Matrix>,
    #[serde(default = "default_one")]
    pub delta: f64,
    #[serde(default = "default_one")]
    pub alpha: f64,
    #[serde(default)]
    pub mode: UpdateMode,
    /// Experiment timing for the dims when absent.
    #[serde(default)]
    pub timing: Option<TrialTiming>,
    pub init: InitScheme,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub translate: bool,
    #[serde(default = "default_true")]
    pub mirror: bool,
    #[serde(default = "default_true")]
    pub mirror_attention_checks: bool,
    #[serde(default = "default_tolerance")]
    pub validation_tolerance: f64,
    #[serde(default = "default_countdown")]
    pub countdown_seconds: f64,
    #[serde(default)]
    pub display: DisplayScaling,
}

impl ExperimentConfig {
    /// Learner defaults for `dims`, circle or ball inits of radius 0.65.
    pub fn defaults(experiment_id: &str, dims: Dims) -> Self {
        let init = if dims.state_len() == 2 {
            InitScheme::Circle8 { radius: 0.65 }
        } else {
            InitScheme::Ball {
                radius: 0.65,
                sampling: BallSampling::Volume,
            }
        };
        Self {
            schema_version: SCHEMA_VERSION,
            experiment_id: experiment_id.to_owned(),
            dims,
            iterations: default_iterations(),
            base_gain: None,
            delta: 1.0,
            alpha: 1.0,
            mode: UpdateMode::Sum,
            timing: None,
            init,
            seed: 0,
            translate: true,
            mirror: true,
            mirror_attention_checks: true,
            validation_tolerance: DEFAULT_VALIDATION_TOLERANCE,
            countdown_seconds: default_countdown(),
            display: DisplayScaling::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.learner_config().validate()?;
        self.timing().validate()?;
        self.init.estimate(self.dims, self.seed, 0)?;
        if !(self.validation_tolerance > 0.0) {
            return Err(Error::Config("validation_tolerance must be positive".into()));
        }
        if !(self.countdown_seconds >= 0.0) {
            return Err(Error::Config("countdown_seconds must be non-negative".into()));
        }
        let d = self.display;
        if !(d.r_min >= 0.0 && d.gain >= 0.0 && d.r_max >= d.r_min) {
            return Err(Error::Config("display needs 0 <= r_min <= r_max and gain >= 0".into()));
        }
        Ok(())
    }

    pub fn learner_config(&self) -> LearnerConfig {
        LearnerConfig {
            base_gain: self
                .base_gain
                .clone()
                .unwrap_or_else(|| Matrix::zeros(self.dims.machine(), self.dims.human())),
            delta: self.delta,
            alpha: self.alpha,
            iterations: self.iterations,
            mode: self.mode,
            ..LearnerConfig::defaults(self.dims)
        }
    }

    pub fn timing(&self) -> TrialTiming {
        self.timing.unwrap_or_else(|| TrialTiming::for_dims(self.dims))
    }
}
