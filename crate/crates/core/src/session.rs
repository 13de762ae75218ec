//! Whole simulated sessions: the learner loop driven by a simulated human.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::game::{AffinePolicy, QuadraticCost};
use crate::human::{HumanModel, SimulatedHuman};
use crate::learner::{learner_update, Estimate, LearnerConfig, LearnerState, PerturbationSchedule};
use crate::protocol::log::SessionLog;
use crate::protocol::screen::ScreenMap;
use crate::protocol::trial::{run_trial, Reduced, Sample, TrialKind, TrialRecord, TrialSpec, TrialTiming};

/// Trial-level settings for a simulated session.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOptions {
    /// `None` picks the experiment timing for the game's dimensions.
    pub timing: Option<TrialTiming>,
    /// Draw a random translation per session and random mirror signs per trial.
    pub randomize_screen: bool,
    /// Seed for the screen randomization.
    pub seed: u64,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self {
            timing: None,
            randomize_screen: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub iteration: usize,
    pub trial_index: usize,
    pub kind: TrialKind,
    pub reduced: Reduced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSession {
    /// `K + 1` learner states, the initial one first.
    pub history: Vec<LearnerState>,
    pub trials: Vec<TrialSummary>,
    pub log: SessionLog,
}

impl SimulatedSession {
    pub fn final_state(&self) -> &LearnerState {
        self.history.last().expect("history holds the initial state")
    }
}

/// Runs `config.iterations` learner iterations of one unperturbed trial plus
/// one trial per perturbation.
///
/// Closed-form humans hold their reduced action for the whole trial, so the
/// logged samples are constant and the reduction is exact. Trajectory humans
/// are sampled tick by tick through the screen map and reduced over the final
/// window.
pub fn run_simulated_session(
    cost: &QuadraticCost,
    config: &LearnerConfig,
    init: Estimate,
    human: &HumanModel,
    options: &TrialOptions,
) -> Result<SimulatedSession> {
    config.validate()?;
    init.check(config.dims)?;
    let dims = config.dims;
    let timing = options.timing.unwrap_or_else(|| TrialTiming::for_dims(dims));
    timing.validate()?;
    let schedule = PerturbationSchedule::new(dims, config.delta)?;
    let mut human = human.instantiate()?;
    let mut screen_rng = ChaCha8Rng::seed_from_u64(options.seed);
    let base_screen = ScreenMap::random(dims.human(), options.randomize_screen, false, &mut screen_rng);

    let mut state = LearnerState::initial(init);
    let mut history = Vec::with_capacity(config.iterations + 1);
    history.push(state.clone());
    let mut trials = Vec::new();
    let mut log = SessionLog::new(dims);
    let mut trial_index = 0;

    for k in 0..config.iterations {
        let kinds = core::iter::once(TrialKind::Unperturbed).chain((0..schedule.len()).map(TrialKind::Perturbation));
        let mut h_unperturbed = Vec::new();
        let mut m_perturbed = Vec::with_capacity(schedule.len());
        for kind in kinds {
            let gain = match kind {
                TrialKind::Perturbation(p) => schedule.perturbed_gain(&config.base_gain, p),
                _ => config.base_gain.clone(),
            };
            let screen = if options.randomize_screen {
                let signs = ScreenMap::random(dims.human(), false, true, &mut screen_rng);
                base_screen.with_signs(signs.signs().to_vec())?
            } else {
                base_screen.clone()
            };
            let spec = TrialSpec {
                policy: state.policy(gain)?,
                timing,
                screen,
                kind,
            };
            let record = simulate_trial(&mut human, cost, &spec)?;
            log.push_trial(k, trial_index, &record, &state.estimate, cost)?;
            match kind {
                TrialKind::Perturbation(_) => m_perturbed.push(record.reduced.m.clone()),
                _ => h_unperturbed = record.reduced.h.clone(),
            }
            trials.push(TrialSummary {
                iteration: k,
                trial_index,
                kind,
                reduced: record.reduced,
            });
            trial_index += 1;
        }
        state = learner_update(&state, config, &h_unperturbed, &m_perturbed)?;
        history.push(state.clone());
    }

    Ok(SimulatedSession { history, trials, log })
}

fn simulate_trial(human: &mut SimulatedHuman, cost: &QuadraticCost, spec: &TrialSpec) -> Result<TrialRecord> {
    if let Some(h) = human.reduced_response(cost, &spec.policy)? {
        return held_action_trial(cost, spec, h);
    }
    let mut source = human.trajectory(cost)?;
    run_trial(cost, spec, &mut source)
}

fn held_action_trial(cost: &QuadraticCost, spec: &TrialSpec, h: Vec<f64>) -> Result<TrialRecord> {
    let policy: &AffinePolicy = &spec.policy;
    let m = policy.machine_action(&h)?;
    let c = cost.evaluate(&h, &m)?;
    let h_raw = spec.screen.game_to_screen(&h)?;
    let samples = (0..spec.timing.sample_count())
        .map(|i| Sample {
            t: spec.timing.time_of(i),
            h_raw: h_raw.clone(),
            h: h.clone(),
            m: m.clone(),
            cost: c,
        })
        .collect();
    Ok(TrialRecord {
        kind: spec.kind,
        samples,
        reduced: Reduced { h, m },
        clamped_samples: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Dims;
    use crate::learner::init_circle_8;
    use alloc::vec;

    #[test]
    fn scalar_defaults_from_circle_start() {
        let dims = Dims::new(1, 1).unwrap();
        let init = init_circle_8(0.65).unwrap()[0].clone();
        let s = run_simulated_session(
            &QuadraticCost::origin(dims),
            &LearnerConfig::defaults(dims),
            init,
            &HumanModel::ExactBestResponse,
            &TrialOptions::default(),
        )
        .unwrap();
        assert_eq!(s.history.len(), 11);
        for (k, st) in s.history.iter().enumerate().skip(1) {
            assert_eq!(st.estimate.h_hat, vec![0.0]);
            let want = -0.65 * libm::pow(2.0, -(k as f64));
            assert!((st.estimate.m_hat[0] - want).abs() < 1e-15);
        }
        assert_eq!(s.log.rows().len(), 20 * 600);
        assert_eq!(s.trials.len(), 20);
    }

    #[test]
    fn origin_start_stays_put() {
        for dims in Dims::experiment_configurations() {
            let s = run_simulated_session(
                &QuadraticCost::origin(dims),
                &LearnerConfig::defaults(dims),
                Estimate::zeros(dims),
                &HumanModel::GradientFlow {
                    rate: 5.0,
                    sigma: 0.0,
                    seed: 1,
                },
                &TrialOptions {
                    randomize_screen: false,
                    ..Default::default()
                },
            )
            .unwrap();
            for st in &s.history {
                assert!(st.estimate.stacked().iter().all(|x| x.abs() < 1e-9));
            }
        }
    }
}
