//! Batches of simulated sessions written to disk.

use std::path::Path;

use coadapt_core::human::HumanModel;
use coadapt_core::protocol::TrialTiming;
use coadapt_core::{run_simulated_session, LearnerConfig, LearnerState, QuadraticCost, SimulatedSession, TrialOptions};

use crate::config::InitScheme;
use crate::error::{Error, Result};
use crate::logfile::{save_iterates, save_log};

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub learner: LearnerConfig,
    pub init: InitScheme,
    pub sessions: usize,
    /// Session `i` uses seed `seed + i` for its human, screen and initial draw.
    pub seed: u64,
    pub human: HumanModel,
    pub timing: Option<TrialTiming>,
}

impl Batch {
    pub fn session_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_add(i as u64)
    }

    pub fn run_session(&self, i: usize) -> Result<SimulatedSession> {
        let dims = self.learner.dims;
        let seed = self.session_seed(i);
        let init = self.init.estimate(dims, self.seed, i as u64)?;
        Ok(run_simulated_session(
            &QuadraticCost::origin(dims),
            &self.learner,
            init,
            &self.human.reseeded(seed),
            &TrialOptions {
                timing: self.timing,
                randomize_screen: true,
                seed,
            },
        )?)
    }

    /// Runs every session, writing `session_NNN_iterates.csv` and, with
    /// `write_logs`, `session_NNN.csv` to `out`. Returns the learner histories.
    pub fn run_to_dir(&self, out: &Path, write_logs: bool) -> Result<Vec<Vec<LearnerState>>> {
        if self.sessions == 0 {
            return Err(Error::Usage("at least one session is needed".into()));
        }
        std::fs::create_dir_all(out).map_err(Error::io(out))?;
        let cost = QuadraticCost::origin(self.learner.dims);
        (0..self.sessions)
            .map(|i| {
                let s = self.run_session(i)?;
                let stem = format!("session_{i:03}");
                if write_logs {
                    save_log(&s.log, &out.join(format!("{stem}.csv")))?;
                }
                save_iterates(&s.history, &cost, &out.join(format!("{stem}_iterates.csv")))?;
                Ok(s.history)
            })
            .collect()
    }
}
