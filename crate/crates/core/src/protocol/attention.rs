//! Attention checks: a standalone trial whose optimum sits a random eighth of
//! the screen off centre. The participant passes by holding the mean action
//! of the final window within an eighth of the screen of the optimum on every
//! axis; five failed attempts screen them out.

use alloc::vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::game::{AffinePolicy, Dims, QuadraticCost};
use crate::linalg::Matrix;
use crate::protocol::screen::{ScreenMap, TRANSLATION_OFFSET};
use crate::protocol::trial::{run_trial, InputSource, TrialKind, TrialRecord, TrialSpec, TrialTiming};

pub const MAX_ATTEMPTS: usize = 5;
pub const PASS_TOLERANCE: f64 = TRANSLATION_OFFSET;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "outcome", rename_all = "snake_case"))]
pub enum AttentionOutcome {
    Pass,
    Retry { attempts_left: usize },
    ScreenedOut,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionCheckState {
    pub attempts_used: usize,
    pub max_attempts: usize,
    pub pass_tolerance: f64,
}

impl Default for AttentionCheckState {
    fn default() -> Self {
        Self {
            attempts_used: 0,
            max_attempts: MAX_ATTEMPTS,
            pass_tolerance: PASS_TOLERANCE,
        }
    }
}

impl AttentionCheckState {
    pub fn attempts_left(&self) -> usize {
        self.max_attempts - self.attempts_used
    }

    /// Scores one attempt from its reduced human action, in game coordinates
    /// where the optimum is the origin.
    pub fn judge(&mut self, reduced_h: &[f64]) -> Result<AttentionOutcome> {
        if self.attempts_used >= self.max_attempts {
            return Err(Error::InvalidParameter("attention check attempts exhausted"));
        }
        self.attempts_used += 1;
        if reduced_h.iter().all(|x| libm::fabs(*x) <= self.pass_tolerance) {
            Ok(AttentionOutcome::Pass)
        } else if self.attempts_used == self.max_attempts {
            Ok(AttentionOutcome::ScreenedOut)
        } else {
            Ok(AttentionOutcome::Retry {
                attempts_left: self.attempts_left(),
            })
        }
    }
}

/// A check trial: the machine holds still at the origin, and the screen map
/// places the optimum a random `±TRANSLATION_OFFSET` off centre per axis.
pub fn attention_check_spec<R: Rng + ?Sized>(
    dims: Dims,
    timing: TrialTiming,
    mirror: bool,
    rng: &mut R,
) -> TrialSpec {
    let policy = AffinePolicy::new(
        Matrix::zeros(dims.machine(), dims.human()),
        vec![0.0; dims.human()],
        vec![0.0; dims.machine()],
    )
    .expect("zero policy is well formed");
    TrialSpec {
        policy,
        timing,
        screen: ScreenMap::random(dims.human(), true, mirror, rng),
        kind: TrialKind::AttentionCheck,
    }
}

pub fn run_attention_check<S: InputSource + ?Sized>(
    state: &mut AttentionCheckState,
    cost: &QuadraticCost,
    spec: &TrialSpec,
    source: &mut S,
) -> Result<(AttentionOutcome, TrialRecord)> {
    if state.attempts_used >= state.max_attempts {
        return Err(Error::InvalidParameter("attention check attempts exhausted"));
    }
    let record = run_trial(cost, spec, source)?;
    let outcome = state.judge(&record.reduced.h)?;
    Ok((outcome, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::trial::Tick;
    use alloc::vec::Vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pass_retry_screen_out() {
        let mut s = AttentionCheckState::default();
        assert_eq!(s.judge(&[0.1]).unwrap(), AttentionOutcome::Pass);

        let mut s = AttentionCheckState::default();
        assert_eq!(s.judge(&[0.1, 0.3]).unwrap(), AttentionOutcome::Retry { attempts_left: 4 });

        let mut s = AttentionCheckState::default();
        for left in (1..5).rev() {
            assert_eq!(s.judge(&[0.5]).unwrap(), AttentionOutcome::Retry { attempts_left: left });
        }
        assert_eq!(s.judge(&[0.5]).unwrap(), AttentionOutcome::ScreenedOut);
        assert!(s.judge(&[0.0]).is_err());
    }

    #[test]
    fn boundary_counts_as_pass() {
        let mut s = AttentionCheckState::default();
        assert_eq!(s.judge(&[-0.25, 0.25]).unwrap(), AttentionOutcome::Pass);
    }

    #[test]
    fn cursor_on_placed_optimum_passes() {
        let dims = Dims::new(2, 2).unwrap();
        let cost = QuadraticCost::origin(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = attention_check_spec(dims, TrialTiming::for_dims(dims), true, &mut rng);
        assert!(spec.screen.offsets().iter().all(|o| o.abs() == 0.25));
        let target = spec.screen.game_to_screen(&[0.0, 0.0]).unwrap();
        let mut src = |_: &Tick<'_>| Some(target.clone());
        let mut state = AttentionCheckState::default();
        let (outcome, rec) = run_attention_check(&mut state, &cost, &spec, &mut src).unwrap();
        assert_eq!(outcome, AttentionOutcome::Pass);
        assert_eq!(rec.samples.len(), 1500);

        // screen centre is a full eighth away on every axis: still inside the box
        let mut centre = |_: &Tick<'_>| Some(Vec::from([0.0, 0.0]));
        let (outcome, _) = run_attention_check(&mut state, &cost, &spec, &mut centre).unwrap();
        assert_eq!(outcome, AttentionOutcome::Pass);
    }
}
