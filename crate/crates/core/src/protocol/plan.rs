use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::game::Dims;
use crate::protocol::trial::TrialKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CheckSlot {
    Beginning,
    Middle,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum PlannedTrial {
    AttentionCheck { slot: CheckSlot },
    /// A learner trial of iteration `iteration` (0-based).
    Main { iteration: usize, kind: TrialKind },
}

impl PlannedTrial {
    pub fn kind(&self) -> TrialKind {
        match self {
            PlannedTrial::AttentionCheck { .. } => TrialKind::AttentionCheck,
            PlannedTrial::Main { kind, .. } => *kind,
        }
    }
}

/// Trial order for a session of `iterations` learner iterations.
///
/// An attention check opens the session, another follows iteration
/// `iterations / 2` (when that splits the run into two non-empty halves) and a
/// last one closes it. Each iteration plays its unperturbed trial first, then
/// the perturbations in schedule order.
pub fn session_plan(dims: Dims, iterations: usize) -> Result<Vec<PlannedTrial>> {
    if iterations == 0 {
        return Err(Error::InvalidParameter("iterations must be at least 1"));
    }
    let per_iteration = 1 + dims.gain_entries();
    let middle = iterations / 2;
    let mut plan = Vec::with_capacity(iterations * per_iteration + 3);
    plan.push(PlannedTrial::AttentionCheck {
        slot: CheckSlot::Beginning,
    });
    for iteration in 0..iterations {
        plan.push(PlannedTrial::Main {
            iteration,
            kind: TrialKind::Unperturbed,
        });
        for p in 0..dims.gain_entries() {
            plan.push(PlannedTrial::Main {
                iteration,
                kind: TrialKind::Perturbation(p),
            });
        }
        if middle > 0 && iteration + 1 == middle {
            plan.push(PlannedTrial::AttentionCheck {
                slot: CheckSlot::Middle,
            });
        }
    }
    plan.push(PlannedTrial::AttentionCheck { slot: CheckSlot::End });
    Ok(plan)
}
