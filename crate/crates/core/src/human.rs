//! Simulated humans.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::game::{AffinePolicy, QuadraticCost};
use crate::protocol::trial::{InputSource, Tick};

/// Gradient-flow rate used when none is given, in 1/s.
pub const DEFAULT_GRADIENT_RATE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "model", rename_all = "snake_case"))]
pub enum HumanModel {
    /// Plays the closed-form best response in every trial.
    ExactBestResponse,
    /// Best response plus Gaussian noise of std-dev `sigma` per axis,
    /// clipped to `[-1, 1]`.
    NoisyBestResponse { sigma: f64, seed: u64 },
    /// Descends the cost along the policy at `rate` (1/s), one explicit Euler
    /// step per sample, with per-sample Gaussian motor noise of std-dev `sigma`.
    GradientFlow { rate: f64, sigma: f64, seed: u64 },
}

impl HumanModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            HumanModel::ExactBestResponse => Ok(()),
            HumanModel::NoisyBestResponse { sigma, .. } => check_sigma(sigma),
            HumanModel::GradientFlow { rate, sigma, .. } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(Error::InvalidParameter("gradient-flow rate must be positive"));
                }
                check_sigma(sigma)
            }
        }
    }

    /// Whether trials are produced sample by sample rather than in closed form.
    pub fn produces_trajectories(&self) -> bool {
        matches!(self, HumanModel::GradientFlow { .. })
    }

    /// The same model with its seed replaced (no-op for the exact model).
    pub fn reseeded(&self, seed: u64) -> Self {
        match *self {
            HumanModel::ExactBestResponse => HumanModel::ExactBestResponse,
            HumanModel::NoisyBestResponse { sigma, .. } => HumanModel::NoisyBestResponse { sigma, seed },
            HumanModel::GradientFlow { rate, sigma, .. } => HumanModel::GradientFlow { rate, sigma, seed },
        }
    }

    pub fn instantiate(&self) -> Result<SimulatedHuman> {
        self.validate()?;
        let seed = match *self {
            HumanModel::ExactBestResponse => 0,
            HumanModel::NoisyBestResponse { seed, .. } | HumanModel::GradientFlow { seed, .. } => seed,
        };
        Ok(SimulatedHuman {
            model: *self,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter("noise std-dev must be non-negative"))
    }
}

/// A running human model with its own random stream.
#[derive(Debug, Clone)]
pub struct SimulatedHuman {
    model: HumanModel,
    rng: ChaCha8Rng,
}

impl SimulatedHuman {
    pub fn model(&self) -> &HumanModel {
        &self.model
    }

    /// The held action for closed-form models; `None` for trajectory models.
    pub fn reduced_response(&mut self, cost: &QuadraticCost, policy: &AffinePolicy) -> Result<Option<Vec<f64>>> {
        match self.model {
            HumanModel::ExactBestResponse => cost.best_response(policy).map(Some),
            HumanModel::NoisyBestResponse { sigma, .. } => {
                let mut h = cost.best_response(policy)?;
                for x in &mut h {
                    let noise: f64 = self.rng.sample(StandardNormal);
                    *x = (*x + sigma * noise).clamp(-1.0, 1.0);
                }
                Ok(Some(h))
            }
            HumanModel::GradientFlow { .. } => Ok(None),
        }
    }

    /// A cursor stream for one trial. The cursor starts at the screen centre.
    pub fn trajectory<'a>(&'a mut self, cost: &'a QuadraticCost) -> Result<GradientFlowSource<'a>> {
        let HumanModel::GradientFlow { rate, sigma, .. } = self.model else {
            return Err(Error::InvalidParameter("model does not produce trajectories"));
        };
        Ok(GradientFlowSource {
            rng: &mut self.rng,
            cost,
            rate,
            sigma,
            h: None,
        })
    }
}

pub struct GradientFlowSource<'a> {
    rng: &'a mut ChaCha8Rng,
    cost: &'a QuadraticCost,
    rate: f64,
    sigma: f64,
    /// Realized game action of the previous tick.
    h: Option<Vec<f64>>,
}

impl GradientFlowSource<'_> {
    /// `∇_h c(h, m(h)) = (h − h*) + Lᵀ (m(h) − m*)`.
    fn gradient(&self, policy: &AffinePolicy, h: &[f64]) -> Option<Vec<f64>> {
        let m = policy.machine_action(h).ok()?;
        let dm: Vec<f64> = m
            .iter()
            .zip(self.cost.machine_optimum())
            .map(|(a, b)| a - b)
            .collect();
        let back = policy.gain().tr_mul_vec(&dm).ok()?;
        Some(
            h.iter()
                .zip(self.cost.human_optimum())
                .zip(back)
                .map(|((x, o), b)| x - o + b)
                .collect(),
        )
    }
}

impl InputSource for GradientFlowSource<'_> {
    fn next_cursor(&mut self, tick: &Tick<'_>) -> Option<Vec<f64>> {
        let screen = &tick.spec.screen;
        let cursor = match self.h.take() {
            None => alloc::vec![0.0; screen.axes()],
            Some(h) => {
                let dt = 1.0 / tick.spec.timing.sample_rate_hz;
                let grad = self.gradient(&tick.spec.policy, &h)?;
                let target: Vec<f64> = h
                    .iter()
                    .zip(grad)
                    .map(|(x, g)| {
                        let noise: f64 = self.rng.sample(StandardNormal);
                        x - self.rate * dt * g + self.sigma * noise
                    })
                    .collect();
                screen
                    .game_to_screen(&target)
                    .ok()?
                    .into_iter()
                    .map(|c| c.clamp(-1.0, 1.0))
                    .collect()
            }
        };
        self.h = Some(screen.screen_to_game(&cursor).ok()?.0);
        Some(cursor)
    }
}
