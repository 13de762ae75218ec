//! A scripted client that plays the exact best response, used to drive the
//! service in tests and demos. It computes its trace with the same screen map
//! and policy code the server uses.

use std::collections::HashSet;

use coadapt_core::game::best_response_at_origin;
use coadapt_core::protocol::trial::reduce_by_time;
use coadapt_core::protocol::{Reduced, Sample, ScreenMap, TrialKind, TrialTiming};
use coadapt_core::{AffinePolicy, QuadraticCost};

use crate::service::SessionActor;
use crate::wire::{ClientEnvelope, ClientMessage, ServerEnvelope, ServerMessage, SessionSummary, TraceSample};

/// Deliberate misbehaviour, keyed by trial index. Each fault fires once.
#[derive(Debug, Clone, Default)]
pub struct Faults {
    /// Upload half the samples.
    pub short_trace: HashSet<usize>,
    /// Report a cost that is off by 1e-3 on one sample.
    pub tampered_cost: HashSet<usize>,
    /// Number of attention-check attempts to fail on purpose.
    pub failed_attention_checks: usize,
}

#[derive(Debug)]
pub struct ScriptedClient {
    experiment_id: String,
    session_id: Option<String>,
    seq: u64,
    timing: Option<TrialTiming>,
    cost: Option<QuadraticCost>,
    faults: Faults,
    summary: Option<SessionSummary>,
    error: Option<String>,
    /// Server reductions of accepted trials, in order.
    accepted: Vec<Reduced>,
    rejected: usize,
}

impl ScriptedClient {
    pub fn new(experiment_id: &str) -> Self {
        Self::with_faults(experiment_id, Faults::default())
    }

    pub fn with_faults(experiment_id: &str, faults: Faults) -> Self {
        Self {
            experiment_id: experiment_id.to_owned(),
            session_id: None,
            seq: 0,
            timing: None,
            cost: None,
            faults,
            summary: None,
            error: None,
            accepted: Vec::new(),
            rejected: 0,
        }
    }

    pub fn summary(&self) -> Option<&SessionSummary> {
        self.summary.as_ref()
    }

    pub fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }

    pub fn is_done(&self) -> bool {
        self.summary.is_some() || self.error.is_some()
    }

    pub fn accepted(&self) -> &[Reduced] {
        &self.accepted
    }

    pub fn rejected(&self) -> usize {
        self.rejected
    }

    fn send(&mut self, message: ClientMessage) -> ClientEnvelope {
        let env = ClientEnvelope {
            session_id: self.session_id.clone(),
            seq: self.seq,
            message,
        };
        self.seq += 1;
        env
    }

    pub fn join(&mut self) -> ClientEnvelope {
        let experiment_id = self.experiment_id.clone();
        self.send(ClientMessage::Join { experiment_id })
    }

    /// Reacts to one server message; returns what to send back, if anything.
    pub fn on_message(&mut self, env: ServerEnvelope) -> Option<ClientEnvelope> {
        if self.session_id.is_none() {
            self.session_id = env.session_id.clone();
        }
        match env.message {
            ServerMessage::SessionConfig { dims, timing, .. } => {
                self.timing = Some(timing);
                self.cost = Some(QuadraticCost::origin(dims));
                Some(self.send(ClientMessage::TrialReady { trial_index: 0 }))
            }
            ServerMessage::TrialStart {
                trial_index,
                kind,
                policy,
                screen,
                ..
            } => {
                let (samples, reduced) = self.play(trial_index, kind, &policy, &screen);
                Some(self.send(ClientMessage::TraceUpload {
                    trial_index,
                    samples,
                    reduced,
                }))
            }
            ServerMessage::TrialResult {
                accepted,
                reduced,
                next_trial_index,
                ..
            } => {
                match reduced {
                    Some(r) if accepted => self.accepted.push(r),
                    _ => self.rejected += 1,
                }
                next_trial_index.map(|trial_index| self.send(ClientMessage::TrialReady { trial_index }))
            }
            ServerMessage::AttentionResult { .. } => None,
            ServerMessage::SessionComplete { summary } => {
                self.summary = Some(summary);
                None
            }
            ServerMessage::Error { message } => {
                self.error = Some(message);
                None
            }
        }
    }

    fn play(
        &mut self,
        trial_index: usize,
        kind: TrialKind,
        policy: &AffinePolicy,
        screen: &ScreenMap,
    ) -> (Vec<TraceSample>, Reduced) {
        let timing = self.timing.expect("session config precedes trials");
        let cost = self.cost.as_ref().expect("session config precedes trials");
        let dh = policy.dims().human();
        let h = if kind == TrialKind::AttentionCheck && self.faults.failed_attention_checks > 0 {
            self.faults.failed_attention_checks -= 1;
            vec![0.6; dh]
        } else {
            best_response_at_origin(policy.gain(), policy.h_hat(), policy.m_hat()).expect("policy is well formed")
        };
        let cursor: Vec<f64> = screen
            .game_to_screen(&h)
            .expect("axes match")
            .into_iter()
            .map(|c| c.clamp(-1.0, 1.0))
            .collect();
        let (h, _) = screen.screen_to_game(&cursor).expect("axes match");
        let m = policy.machine_action(&h).expect("axes match");
        let c = cost.evaluate(&h, &m).expect("axes match");
        let mut n = timing.sample_count();
        if self.faults.short_trace.remove(&trial_index) {
            n /= 2;
        }
        let mut samples: Vec<Sample> = (0..n)
            .map(|i| Sample {
                t: timing.time_of(i),
                h_raw: cursor.clone(),
                h: h.clone(),
                m: m.clone(),
                cost: c,
            })
            .collect();
        let reduced = reduce_by_time(&samples, timing.duration_seconds - timing.reduce_window_seconds)
            .unwrap_or_else(|| Reduced {
                h: h.clone(),
                m: m.clone(),
            });
        if self.faults.tampered_cost.remove(&trial_index) {
            samples[0].cost += 1e-3;
        }
        let trace = samples
            .into_iter()
            .map(|s| TraceSample {
                t: s.t,
                h_raw: s.h_raw,
                m: s.m,
                cost: s.cost,
            })
            .collect();
        (trace, reduced)
    }
}

/// Serializes and parses a message, as the transport would.
fn over_the_wire<T: serde::Serialize + serde::de::DeserializeOwned>(msg: &T) -> T {
    let text = serde_json::to_string(msg).expect("messages serialize");
    serde_json::from_str(&text).expect("messages parse")
}

/// Plays a whole session against an in-process actor, passing every message
/// through its JSON encoding.
pub fn run_in_process(actor: &mut SessionActor, client: &mut ScriptedClient) {
    let mut outbox = vec![client.join()];
    while let Some(env) = outbox.pop() {
        for reply in actor.handle(over_the_wire(&env)) {
            if let Some(next) = client.on_message(over_the_wire(&reply)) {
                outbox.push(next);
            }
        }
    }
}

/// Plays a whole session against a websocket server at `url`.
pub async fn run_over_websocket(url: &str, client: &mut ScriptedClient) -> crate::Result<()> {
    use futures_util::{SinkExt, StreamExt};
    use tokio_tungstenite::tungstenite::Message;

    let ws_err = |e: tokio_tungstenite::tungstenite::Error| crate::Error::Usage(format!("websocket: {e}"));
    let (mut ws, _) = tokio_tungstenite::connect_async(url).await.map_err(ws_err)?;
    ws.send(Message::text(serde_json::to_string(&client.join())?))
        .await
        .map_err(ws_err)?;
    while !client.is_done() {
        let Some(frame) = ws.next().await else { break };
        let text = match frame.map_err(ws_err)? {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        let env: ServerEnvelope = serde_json::from_str(&text)?;
        if let Some(reply) = client.on_message(env) {
            ws.send(Message::text(serde_json::to_string(&reply)?))
                .await
                .map_err(ws_err)?;
        }
    }
    let _ = ws.close(None).await;
    Ok(())
}
