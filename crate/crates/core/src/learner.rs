//! The machine's perturb-observe-update learner.
//!
//! Each iteration plays one trial with the base gain and one trial per gain
//! entry with that entry offset by `delta`. The human estimate jumps to the
//! response seen in the unperturbed trial; the machine estimate moves by
//! `alpha` times the summed displacement of the perturbed machine actions.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_finite, check_len, Error, Result};
use crate::game::{AffinePolicy, Dims};
use crate::linalg::Matrix;

/// How perturbed responses are aggregated into the machine-estimate step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum UpdateMode {
    /// `m_hat + alpha (Σ m_p − P m_hat)`.
    #[default]
    Sum,
    /// Same, divided by the number of perturbations `P`.
    Averaged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub dims: Dims,
    /// Base gain, `machine x human`.
    pub base_gain: Matrix,
    pub delta: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub mode: UpdateMode,
}

impl LearnerConfig {
    /// `L0 = 0`, `delta = 1`, `alpha = 1`, 10 iterations.
    pub fn defaults(dims: Dims) -> Self {
        Self {
            dims,
            base_gain: Matrix::zeros(dims.machine(), dims.human()),
            delta: 1.0,
            alpha: 1.0,
            iterations: 10,
            mode: UpdateMode::Sum,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_gain.rows() != self.dims.machine() || self.base_gain.cols() != self.dims.human() {
            return Err(Error::Shape {
                what: "base gain",
                expected: self.dims.gain_entries(),
                found: self.base_gain.rows() * self.base_gain.cols(),
            });
        }
        if !self.base_gain.is_finite() {
            return Err(Error::NonFinite("base gain"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter("delta must be positive and finite"));
        }
        // alpha = 0 is admitted so a frozen learner can be analysed
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter("alpha must be non-negative and finite"));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be at least 1"));
        }
        Ok(())
    }
}

/// A point in estimate space `(h_hat, m_hat)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub h_hat: Vec<f64>,
    pub m_hat: Vec<f64>,
}

impl Estimate {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            h_hat: vec![0.0; dims.human()],
            m_hat: vec![0.0; dims.machine()],
        }
    }

    /// Splits a stacked state vector `[h_hat; m_hat]`.
    pub fn from_stacked(dims: Dims, x: &[f64]) -> Result<Self> {
        check_len("stacked state", x, dims.state_len())?;
        Ok(Self {
            h_hat: x[..dims.human()].to_vec(),
            m_hat: x[dims.human()..].to_vec(),
        })
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut x = self.h_hat.clone();
        x.extend_from_slice(&self.m_hat);
        x
    }

    pub fn check(&self, dims: Dims) -> Result<()> {
        check_len("human estimate", &self.h_hat, dims.human())?;
        check_len("machine estimate", &self.m_hat, dims.machine())?;
        check_finite("estimate", &self.h_hat)?;
        check_finite("estimate", &self.m_hat)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LearnerState {
    /// Iteration index; the state before any update has `k = 0`.
    pub k: usize,
    pub estimate: Estimate,
}

impl LearnerState {
    pub fn initial(estimate: Estimate) -> Self {
        Self { k: 0, estimate }
    }

    pub fn h_hat(&self) -> &[f64] {
        &self.estimate.h_hat
    }

    pub fn m_hat(&self) -> &[f64] {
        &self.estimate.m_hat
    }

    /// The affine policy this state plays with the given gain.
    pub fn policy(&self, gain: Matrix) -> Result<AffinePolicy> {
        AffinePolicy::new(gain, self.estimate.h_hat.clone(), self.estimate.m_hat.clone())
    }
}

/// One single-entry perturbation per gain entry, in row-major entry order.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSchedule {
    dims: Dims,
    delta: f64,
}

impl PerturbationSchedule {
    pub fn new(dims: Dims, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter("delta must be positive and finite"));
        }
        Ok(Self { dims, delta })
    }

    pub fn len(&self) -> usize {
        self.dims.gain_entries()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(row, col)` of the entry offset by perturbation `p`.
    pub fn entry(&self, p: usize) -> (usize, usize) {
        (p / self.dims.human(), p % self.dims.human())
    }

    /// The offset matrix of perturbation `p`: `delta` at one entry, zero elsewhere.
    pub fn offset(&self, p: usize) -> Matrix {
        let mut m = Matrix::zeros(self.dims.machine(), self.dims.human());
        m[self.entry(p)] = self.delta;
        m
    }

    pub fn offsets(&self) -> Vec<Matrix> {
        (0..self.len()).map(|p| self.offset(p)).collect()
    }

    /// `base + offset(p)`.
    pub fn perturbed_gain(&self, base: &Matrix, p: usize) -> Matrix {
        let mut g = base.clone();
        g[self.entry(p)] += self.delta;
        g
    }
}

pub fn perturbation_schedule(dims: Dims, delta: f64) -> Result<PerturbationSchedule> {
    PerturbationSchedule::new(dims, delta)
}

/// One learner step from the reduced trial observations.
///
/// `h_unperturbed` is the mean human action of the unperturbed trial and
/// `m_perturbed[p]` the mean machine action of perturbation trial `p`.
pub fn learner_update(
    state: &LearnerState,
    config: &LearnerConfig,
    h_unperturbed: &[f64],
    m_perturbed: &[Vec<f64>],
) -> Result<LearnerState> {
    let dims = config.dims;
    let p_count = dims.gain_entries();
    if m_perturbed.len() != p_count {
        return Err(Error::Schedule {
            expected: p_count,
            found: m_perturbed.len(),
        });
    }
    state.estimate.check(dims)?;
    check_len("unperturbed human response", h_unperturbed, dims.human())?;
    for m in m_perturbed {
        check_len("perturbed machine response", m, dims.machine())?;
    }

    let scale = match config.mode {
        UpdateMode::Sum => config.alpha,
        UpdateMode::Averaged => config.alpha / p_count as f64,
    };
    let m_hat: Vec<f64> = state
        .m_hat()
        .iter()
        .enumerate()
        .map(|(i, &mh)| {
            let summed: f64 = m_perturbed.iter().map(|m| m[i]).sum();
            mh + scale * (summed - p_count as f64 * mh)
        })
        .collect();

    Ok(LearnerState {
        k: state.k + 1,
        estimate: Estimate {
            h_hat: h_unperturbed.to_vec(),
            m_hat,
        },
    })
}

/// Eight starting estimates for the 1x1 game, equally spaced on a circle in
/// the `(h_hat, m_hat)` plane at angles `k * 45°` from the positive `h_hat` axis.
pub fn init_circle_8(radius: f64) -> Result<[Estimate; 8]> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter("radius must be non-negative and finite"));
    }
    Ok(core::array::from_fn(|k| {
        let angle = k as f64 * core::f64::consts::FRAC_PI_4;
        // exact values on the axes keep the axis-aligned starts free of rounding noise
        let (s, c) = match k {
            0 => (0.0, 1.0),
            2 => (1.0, 0.0),
            4 => (0.0, -1.0),
            6 => (-1.0, 0.0),
            _ => (libm::sin(angle), libm::cos(angle)),
        };
        Estimate {
            h_hat: vec![radius * c],
            m_hat: vec![radius * s],
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BallSampling {
    /// Uniform over the closed ball.
    #[default]
    Volume,
    /// Uniform over the bounding sphere, so every start is exactly `radius` away.
    Surface,
}

/// A start drawn uniformly from the ball of `radius` around the origin of the
/// stacked `(h_hat, m_hat)` space. Deterministic in `seed`.
pub fn init_random_ball(dims: Dims, radius: f64, sampling: BallSampling, seed: u64) -> Result<Estimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_ball(dims, radius, sampling, &mut rng)
}

pub fn sample_ball<R: Rng + ?Sized>(
    dims: Dims,
    radius: f64,
    sampling: BallSampling,
    rng: &mut R,
) -> Result<Estimate> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter("radius must be non-negative and finite"));
    }
    let n = dims.state_len();
    let mut x: Vec<f64>;
    loop {
        x = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = libm::sqrt(x.iter().map(|v| v * v).sum::<f64>());
        if norm > 1e-300 {
            x.iter_mut().for_each(|v| *v /= norm);
            break;
        }
    }
    let r = match sampling {
        BallSampling::Volume => radius * libm::pow(rng.random::<f64>(), 1.0 / n as f64),
        BallSampling::Surface => radius,
    };
    x.iter_mut().for_each(|v| *v *= r);
    Estimate::from_stacked(dims, &x)
}
