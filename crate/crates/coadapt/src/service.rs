//! Server side of one session, independent of transport.
//!
//! [`SessionActor::handle`] consumes one client envelope and returns the
//! replies. Any protocol violation (bad sequence number, wrong session id,
//! message out of phase) ends the session with an `error` message.

use std::sync::Arc;

use coadapt_core::learner::learner_update;
use coadapt_core::protocol::attention::attention_check_spec;
use coadapt_core::protocol::trial::reduce_by_time;
use coadapt_core::protocol::{
    session_plan, AttentionCheckState, AttentionOutcome, PlannedTrial, Reduced, Sample, ScreenMap, SessionLog,
    TrialKind, TrialRecord, TrialSpec, TrialTiming,
};
use coadapt_core::{LearnerConfig, LearnerState, PerturbationSchedule, QuadraticCost};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::wire::{
    ClientEnvelope, ClientMessage, ServerEnvelope, ServerMessage, SessionStatus, SessionSummary, TraceSample,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AwaitJoin,
    AwaitReady,
    AwaitTrace,
    Finished,
}

/// Accepted traces may differ from the nominal sample count by this fraction.
pub const SAMPLE_COUNT_SLACK: f64 = 0.1;

pub struct SessionActor {
    id: String,
    config: Arc<ExperimentConfig>,
    cost: QuadraticCost,
    learner: LearnerConfig,
    schedule: PerturbationSchedule,
    timing: TrialTiming,
    plan: Vec<PlannedTrial>,
    cursor: usize,
    phase: Phase,
    state: LearnerState,
    history: Vec<LearnerState>,
    attention: AttentionCheckState,
    rng: ChaCha8Rng,
    base_screen: ScreenMap,
    active: Option<TrialSpec>,
    h_unperturbed: Option<Vec<f64>>,
    m_perturbed: Vec<Vec<f64>>,
    log: SessionLog,
    trials_played: usize,
    next_client_seq: u64,
    next_server_seq: u64,
    status: Option<SessionStatus>,
    termination: Option<String>,
}

impl SessionActor {
    /// Session `number` of the experiment; it seeds the screen maps and picks
    /// the initial estimate.
    pub fn new(config: Arc<ExperimentConfig>, number: u64) -> crate::Result<Self> {
        config.validate()?;
        let dims = config.dims;
        let learner = config.learner_config();
        let seed = config.seed.wrapping_add(number);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base_screen = ScreenMap::random(dims.human(), config.translate, false, &mut rng);
        let init = config.init.estimate(dims, config.seed, number)?;
        let state = LearnerState::initial(init);
        Ok(Self {
            id: format!("{}-{number:04}", config.experiment_id),
            cost: QuadraticCost::origin(dims),
            schedule: PerturbationSchedule::new(dims, learner.delta)?,
            timing: config.timing(),
            plan: session_plan(dims, learner.iterations)?,
            learner,
            cursor: 0,
            phase: Phase::AwaitJoin,
            history: vec![state.clone()],
            state,
            attention: AttentionCheckState::default(),
            rng,
            base_screen,
            active: None,
            h_unperturbed: None,
            m_perturbed: Vec::new(),
            log: SessionLog::new(dims),
            trials_played: 0,
            next_client_seq: 0,
            next_server_seq: 0,
            status: None,
            termination: None,
            config,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn cost(&self) -> &QuadraticCost {
        &self.cost
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    /// Learner states so far, the initial one first.
    pub fn history(&self) -> &[LearnerState] {
        &self.history
    }

    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Finished
    }

    /// `None` while running or after termination by error.
    pub fn status(&self) -> Option<SessionStatus> {
        self.status
    }

    pub fn termination_reason(&self) -> Option<&str> {
        self.termination.as_deref()
    }

    pub fn handle(&mut self, env: ClientEnvelope) -> Vec<ServerEnvelope> {
        match self.dispatch(env) {
            Ok(msgs) => msgs.into_iter().map(|m| self.envelope(m)).collect(),
            Err(message) => vec![self.terminate(message)],
        }
    }

    /// Ends the session; the returned `error` message tells the client why.
    pub fn terminate(&mut self, message: String) -> ServerEnvelope {
        log::warn!("session {}: terminated: {message}", self.id);
        self.phase = Phase::Finished;
        self.termination = Some(message.clone());
        self.envelope(ServerMessage::Error { message })
    }

    fn envelope(&mut self, message: ServerMessage) -> ServerEnvelope {
        let seq = self.next_server_seq;
        self.next_server_seq += 1;
        ServerEnvelope {
            session_id: Some(self.id.clone()),
            seq,
            message,
        }
    }

    fn dispatch(&mut self, env: ClientEnvelope) -> Result<Vec<ServerMessage>, String> {
        if self.phase == Phase::Finished {
            return Err("session is over".into());
        }
        if env.seq != self.next_client_seq {
            return Err(format!("expected seq {}, got {}", self.next_client_seq, env.seq));
        }
        self.next_client_seq += 1;
        match (&env.message, env.session_id.as_deref()) {
            (ClientMessage::Join { .. }, None) => {}
            (ClientMessage::Join { .. }, Some(_)) => return Err("join must not carry a session id".into()),
            (_, Some(id)) if id == self.id => {}
            (_, _) => return Err("wrong or missing session id".into()),
        }
        match (self.phase, env.message) {
            (Phase::AwaitJoin, ClientMessage::Join { experiment_id }) => self.on_join(&experiment_id),
            (Phase::AwaitReady, ClientMessage::TrialReady { trial_index }) => self.on_ready(trial_index),
            (
                Phase::AwaitTrace,
                ClientMessage::TraceUpload {
                    trial_index,
                    samples,
                    reduced,
                },
            ) => self.on_trace(trial_index, &samples, &reduced),
            (phase, msg) => Err(format!("unexpected {} while {phase:?}", message_name(&msg))),
        }
    }

    fn on_join(&mut self, experiment_id: &str) -> Result<Vec<ServerMessage>, String> {
        if experiment_id != self.config.experiment_id {
            return Err(format!("unknown experiment {experiment_id:?}"));
        }
        self.phase = Phase::AwaitReady;
        Ok(vec![ServerMessage::SessionConfig {
            dims: self.config.dims,
            timing: self.timing,
            planned_trials: self.plan.len(),
            display: self.config.display,
        }])
    }

    fn on_ready(&mut self, trial_index: usize) -> Result<Vec<ServerMessage>, String> {
        if trial_index != self.trials_played {
            return Err(format!("expected trial {}, got {trial_index}", self.trials_played));
        }
        // a rejected trace replays the trial exactly as it was first shown
        let spec = match self.active.take() {
            Some(spec) => spec,
            None => self.next_spec().map_err(|e| e.to_string())?,
        };
        let msg = ServerMessage::TrialStart {
            trial_index,
            kind: spec.kind,
            policy: spec.policy.clone(),
            mirror_signs: spec.screen.signs().to_vec(),
            screen: spec.screen.clone(),
            countdown_seconds: self.config.countdown_seconds,
        };
        self.active = Some(spec);
        self.phase = Phase::AwaitTrace;
        Ok(vec![msg])
    }

    fn next_spec(&mut self) -> coadapt_core::Result<TrialSpec> {
        let dims = self.config.dims;
        match self.plan[self.cursor] {
            PlannedTrial::AttentionCheck { .. } => {
                let mirror = self.config.mirror && self.config.mirror_attention_checks;
                Ok(attention_check_spec(dims, self.timing, mirror, &mut self.rng))
            }
            PlannedTrial::Main { kind, .. } => {
                let gain = match kind {
                    TrialKind::Perturbation(p) => self.schedule.perturbed_gain(&self.learner.base_gain, p),
                    _ => self.learner.base_gain.clone(),
                };
                let screen = if self.config.mirror {
                    let signs = ScreenMap::random(dims.human(), false, true, &mut self.rng);
                    self.base_screen.with_signs(signs.signs().to_vec())?
                } else {
                    self.base_screen.clone()
                };
                Ok(TrialSpec {
                    policy: self.state.policy(gain)?,
                    timing: self.timing,
                    screen,
                    kind,
                })
            }
        }
    }

    fn on_trace(
        &mut self,
        trial_index: usize,
        samples: &[TraceSample],
        client_reduced: &Reduced,
    ) -> Result<Vec<ServerMessage>, String> {
        if trial_index != self.trials_played {
            return Err(format!("trace for trial {trial_index}, expected {}", self.trials_played));
        }
        let spec = self.active.take().expect("a trial is active while awaiting its trace");
        let record = match validate_trace(
            &self.cost,
            &spec,
            samples,
            client_reduced,
            self.config.validation_tolerance,
        ) {
            Ok(r) => r,
            Err(reason) => {
                log::info!("session {}: trial {trial_index} rejected: {reason}", self.id);
                self.active = Some(spec);
                self.phase = Phase::AwaitReady;
                return Ok(vec![ServerMessage::TrialResult {
                    trial_index,
                    accepted: false,
                    reduced: None,
                    reason: Some(reason),
                    next_trial_index: Some(trial_index),
                }]);
            }
        };

        let iterations_done = self.history.len() - 1;
        let logged_iteration = match self.plan[self.cursor] {
            PlannedTrial::Main { iteration, .. } => iteration,
            PlannedTrial::AttentionCheck { .. } => iterations_done,
        };
        self.log
            .push_trial(logged_iteration, trial_index, &record, &self.state.estimate, &self.cost)
            .map_err(|e| e.to_string())?;
        self.trials_played += 1;

        let mut extra = Vec::new();
        match record.kind {
            TrialKind::AttentionCheck => {
                let outcome = self.attention.judge(&record.reduced.h).map_err(|e| e.to_string())?;
                extra.push(ServerMessage::AttentionResult {
                    outcome: outcome.into(),
                    attempts_left: self.attention.attempts_left(),
                });
                match outcome {
                    AttentionOutcome::Pass => {
                        self.attention = AttentionCheckState::default();
                        self.cursor += 1;
                    }
                    AttentionOutcome::Retry { .. } => {}
                    AttentionOutcome::ScreenedOut => self.status = Some(SessionStatus::ScreenedOut),
                }
            }
            TrialKind::Unperturbed => {
                self.h_unperturbed = Some(record.reduced.h.clone());
                self.cursor += 1;
            }
            TrialKind::Perturbation(_) => {
                self.m_perturbed.push(record.reduced.m.clone());
                self.cursor += 1;
                if self.m_perturbed.len() == self.schedule.len() {
                    let h = self.h_unperturbed.take().ok_or("iteration has no unperturbed trial")?;
                    let m = std::mem::take(&mut self.m_perturbed);
                    self.state = learner_update(&self.state, &self.learner, &h, &m).map_err(|e| e.to_string())?;
                    self.history.push(self.state.clone());
                }
            }
        }
        if self.status.is_none() && self.cursor == self.plan.len() {
            self.status = Some(SessionStatus::Completed);
        }

        let finished = self.status.is_some();
        let mut out = vec![ServerMessage::TrialResult {
            trial_index,
            accepted: true,
            reduced: Some(record.reduced),
            reason: None,
            next_trial_index: (!finished).then_some(self.trials_played),
        }];
        out.extend(extra);
        if let Some(status) = self.status {
            self.phase = Phase::Finished;
            out.push(ServerMessage::SessionComplete {
                summary: SessionSummary {
                    status,
                    iterations_completed: self.history.len() - 1,
                    trials_played: self.trials_played,
                },
            });
        } else {
            self.phase = Phase::AwaitReady;
        }
        Ok(out)
    }
}

fn message_name(m: &ClientMessage) -> &'static str {
    match m {
        ClientMessage::Join { .. } => "join",
        ClientMessage::TrialReady { .. } => "trial_ready",
        ClientMessage::TraceUpload { .. } => "trace_upload",
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Recomputes the trial from the raw cursor trace and checks the client's
/// per-sample values and reduction against it.
pub fn validate_trace(
    cost: &QuadraticCost,
    spec: &TrialSpec,
    trace: &[TraceSample],
    client_reduced: &Reduced,
    tol: f64,
) -> Result<TrialRecord, String> {
    let timing = spec.timing;
    let nominal = timing.sample_count();
    if trace.len().abs_diff(nominal) as f64 > SAMPLE_COUNT_SLACK * nominal as f64 {
        return Err(format!("expected about {nominal} samples, got {}", trace.len()));
    }
    let period = 1.0 / timing.sample_rate_hz;
    let mut samples = Vec::with_capacity(trace.len());
    let mut clamped_samples = 0;
    let mut last_t = f64::NEG_INFINITY;
    for (i, s) in trace.iter().enumerate() {
        if !(s.t.is_finite() && s.t > last_t && s.t >= 0.0 && s.t <= timing.duration_seconds + period) {
            return Err(format!("sample {i}: bad timestamp {}", s.t));
        }
        last_t = s.t;
        if !s.h_raw.iter().all(|x| x.is_finite()) {
            return Err(format!("sample {i}: non-finite cursor"));
        }
        let (h, clamped) = spec.screen.screen_to_game(&s.h_raw).map_err(|e| format!("sample {i}: {e}"))?;
        clamped_samples += usize::from(clamped);
        let m = spec.policy.machine_action(&h).map_err(|e| e.to_string())?;
        let c = cost.evaluate(&h, &m).map_err(|e| e.to_string())?;
        if !close(&m, &s.m, tol) || (c - s.cost).abs() > tol {
            return Err(format!("sample {i}: client action or cost disagrees with the server"));
        }
        samples.push(Sample {
            t: s.t,
            h_raw: s.h_raw.clone(),
            h,
            m,
            cost: c,
        });
    }
    let window_start = timing.duration_seconds - timing.reduce_window_seconds;
    let reduced = reduce_by_time(&samples, window_start).ok_or("no samples in the reduce window")?;
    if !close(&reduced.h, &client_reduced.h, tol) || !close(&reduced.m, &client_reduced.m, tol) {
        return Err("client reduction disagrees with the server".into());
    }
    Ok(TrialRecord {
        kind: spec.kind,
        samples,
        reduced,
        clamped_samples,
    })
}
