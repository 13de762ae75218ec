//! The learner under an exactly best-responding human is a linear map on the
//! stacked estimate `x = [h_hat; m_hat]`:
//!
//! ```text
//! h_hat+ = (I + L0ᵀL0)⁻¹ L0ᵀL0 h_hat − (I + L0ᵀL0)⁻¹ L0ᵀ m_hat
//! m_hat+ = m_hat + alpha Σ_p L_p (BR_p − h_hat)
//! BR_p   = (I + L_pᵀL_p)⁻¹ (L_pᵀL_p h_hat − L_pᵀ m_hat),   L_p = L0 + offset_p
//! ```
//!
//! Each block is assembled from explicit inverses so this module stays an
//! independent route from the learner, which solves the best response by
//! Cholesky per trial.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Result};
use crate::game::Dims;
use crate::learner::{LearnerConfig, PerturbationSchedule, UpdateMode};
use crate::linalg::{self, inverse, Complex, Matrix};

/// Entries of `A^k` at or below this (times `max(1, ‖A‖max)^k`) count as zero
/// in the nilpotency test.
pub const NILPOTENCY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopSystem {
    dims: Dims,
    base_gain: Matrix,
    delta: f64,
    alpha: f64,
    mode: UpdateMode,
    transition: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StabilityReport {
    pub spectral_radius: f64,
    pub eigenvalues: Vec<Complex>,
    /// `spectral_radius < 1`.
    pub converges: bool,
    /// The attracting fixed point `(h*, m*)`, present only when `converges`.
    pub fixed_point: Option<Vec<f64>>,
    /// Smallest `k` with `A^k = 0`, if the matrix is nilpotent.
    pub nilpotency_index: Option<usize>,
}

impl ClosedLoopSystem {
    pub fn new(dims: Dims, base_gain: &Matrix, delta: f64, alpha: f64, mode: UpdateMode) -> Result<Self> {
        let config = LearnerConfig {
            dims,
            base_gain: base_gain.clone(),
            delta,
            alpha,
            iterations: 1,
            mode,
        };
        Self::from_config(&config)
    }

    pub fn from_config(config: &LearnerConfig) -> Result<Self> {
        config.validate()?;
        let dims = config.dims;
        let (dh, dm) = (dims.human(), dims.machine());
        let l0 = &config.base_gain;

        let mut a = Matrix::zeros(dims.state_len(), dims.state_len());

        let m0 = inverse(&Matrix::identity(dh).add(&l0.gram())?)?;
        let l0t = l0.transpose();
        a.set_block(0, 0, &m0.mul(&l0t.mul(l0)?)?);
        a.set_block(0, dh, &m0.mul(&l0t)?.scale(-1.0));

        let schedule = PerturbationSchedule::new(dims, config.delta)?;
        let scale = match config.mode {
            UpdateMode::Sum => config.alpha,
            UpdateMode::Averaged => config.alpha / schedule.len() as f64,
        };
        let mut lower_left = Matrix::zeros(dm, dh);
        let mut lower_right = Matrix::identity(dm);
        for p in 0..schedule.len() {
            let lp = schedule.perturbed_gain(l0, p);
            let lpt = lp.transpose();
            let mp = inverse(&Matrix::identity(dh).add(&lp.gram())?)?;
            // L_p (M_p L_pᵀ L_p − I)
            let br_h = mp.mul(&lpt.mul(&lp)?)?;
            let left = lp.mul(&br_h.sub(&Matrix::identity(dh))?)?;
            // −L_p M_p L_pᵀ
            let right = lp.mul(&mp.mul(&lpt)?)?.scale(-1.0);
            lower_left = lower_left.add(&left.scale(scale))?;
            lower_right = lower_right.add(&right.scale(scale))?;
        }
        a.set_block(dh, 0, &lower_left);
        a.set_block(dh, dh, &lower_right);

        Ok(Self {
            dims,
            base_gain: l0.clone(),
            delta: config.delta,
            alpha: config.alpha,
            mode: config.mode,
            transition: a,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn base_gain(&self) -> &Matrix {
        &self.base_gain
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> UpdateMode {
        self.mode
    }

    /// The transition matrix `A`.
    pub fn matrix(&self) -> &Matrix {
        &self.transition
    }

    pub fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.transition.mul_vec(x)
    }

    /// `x0, A x0, …, A^k x0`.
    pub fn iterate(&self, x0: &[f64], k: usize) -> Result<Vec<Vec<f64>>> {
        check_len("initial state", x0, self.dims.state_len())?;
        let mut out = Vec::with_capacity(k + 1);
        out.push(x0.to_vec());
        for _ in 0..k {
            let next = self.step(out.last().expect("non-empty"))?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn power(&self, k: usize) -> Result<Matrix> {
        let n = self.dims.state_len();
        let mut p = Matrix::identity(n);
        for _ in 0..k {
            p = p.mul(&self.transition)?;
        }
        Ok(p)
    }

    /// Smallest `k <= n` with `A^k` numerically zero.
    pub fn nilpotency_index(&self) -> Result<Option<usize>> {
        let n = self.dims.state_len();
        let norm = self.transition.max_abs().max(1.0);
        let mut p = Matrix::identity(n);
        for k in 1..=n {
            p = p.mul(&self.transition)?;
            if p.max_abs() <= NILPOTENCY_TOLERANCE * libm::pow(norm, k as f64) {
                return Ok(Some(k));
            }
        }
        Ok(None)
    }

    pub fn stability(&self) -> Result<StabilityReport> {
        let nilpotency_index = self.nilpotency_index()?;
        let eigenvalues = match nilpotency_index {
            // every eigenvalue of a nilpotent matrix is exactly zero; QR on a
            // defective zero block only recovers them to ~sqrt(eps)
            Some(_) => vec![Complex { re: 0.0, im: 0.0 }; self.dims.state_len()],
            None => linalg::eigenvalues(&self.transition)?,
        };
        let spectral_radius = linalg::spectral_radius(&eigenvalues);
        let converges = spectral_radius < 1.0;
        Ok(StabilityReport {
            spectral_radius,
            eigenvalues,
            converges,
            fixed_point: converges.then(|| vec![0.0; self.dims.state_len()]),
            nilpotency_index,
        })
    }
}

/// Builds the transition matrix for `config`.
pub fn transition_matrix(config: &LearnerConfig) -> Result<ClosedLoopSystem> {
    ClosedLoopSystem::from_config(config)
}
