//! JSON messages exchanged with the browser client.
//!
//! Every message is an envelope `{"session_id", "seq", "message"}` whose
//! `message` is tagged by `"type"`. Each side numbers its own messages from 0
//! upward; the client's `join` carries no session id and the server assigns
//! one in its reply. Unknown fields are rejected at every level.

use coadapt_core::protocol::{AttentionOutcome, Reduced, ScreenMap, Sign, TrialKind, TrialTiming};
use coadapt_core::{AffinePolicy, Dims};
use serde::{Deserialize, Serialize};

use crate::config::DisplayScaling;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope<M> {
    pub session_id: Option<String>,
    pub seq: u64,
    pub message: M,
}

/// One uploaded frame. `m` and `cost` are the client's own evaluation, which
/// the server checks against its recomputation from `h_raw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSample {
    pub t: f64,
    pub h_raw: Vec<f64>,
    pub m: Vec<f64>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Join {
        experiment_id: String,
    },
    TrialReady {
        trial_index: usize,
    },
    TraceUpload {
        trial_index: usize,
        samples: Vec<TraceSample>,
        /// The client's reduction of its own trace.
        reduced: Reduced,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionVerdict {
    Pass,
    Retry,
    ScreenedOut,
}

impl From<AttentionOutcome> for AttentionVerdict {
    fn from(o: AttentionOutcome) -> Self {
        match o {
            AttentionOutcome::Pass => AttentionVerdict::Pass,
            AttentionOutcome::Retry { .. } => AttentionVerdict::Retry,
            AttentionOutcome::ScreenedOut => AttentionVerdict::ScreenedOut,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Completed,
    ScreenedOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSummary {
    pub status: SessionStatus,
    pub iterations_completed: usize,
    pub trials_played: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServerMessage {
    SessionConfig {
        dims: Dims,
        timing: TrialTiming,
        planned_trials: usize,
        display: DisplayScaling,
    },
    TrialStart {
        trial_index: usize,
        kind: TrialKind,
        policy: AffinePolicy,
        /// Full cursor map for this trial, translation included.
        screen: ScreenMap,
        mirror_signs: Vec<Sign>,
        countdown_seconds: f64,
    },
    TrialResult {
        trial_index: usize,
        accepted: bool,
        /// Server-side reduction, present when accepted.
        reduced: Option<Reduced>,
        /// Why the trace was rejected; the trial is then replayed.
        reason: Option<String>,
        /// Trial to request next; `None` once the session is over.
        next_trial_index: Option<usize>,
    },
    AttentionResult {
        outcome: AttentionVerdict,
        attempts_left: usize,
    },
    SessionComplete {
        summary: SessionSummary,
    },
    /// The session is terminated.
    Error {
        message: String,
    },
}

pub type ClientEnvelope = Envelope<ClientMessage>;
pub type ServerEnvelope = Envelope<ServerMessage>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn join_text() {
        let env = ClientEnvelope {
            session_id: None,
            seq: 0,
            message: ClientMessage::Join {
                experiment_id: "pilot".into(),
            },
        };
        let text = serde_json::to_string(&env).unwrap();
        assert_eq!(
            text,
            r#"{"session_id":null,"seq":0,"message":{"type":"join","experiment_id":"pilot"}}"#
        );
        assert_eq!(serde_json::from_str::<ClientEnvelope>(&text).unwrap(), env);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        for text in [
            r#"{"session_id":null,"seq":0,"extra":1,"message":{"type":"join","experiment_id":"a"}}"#,
            r#"{"session_id":null,"seq":0,"message":{"type":"join","experiment_id":"a","extra":1}}"#,
            r#"{"session_id":"s","seq":1,"message":{"type":"trial_ready","trial_index":0,"x":0}}"#,
            r#"{"session_id":"s","seq":1,"message":{"type":"leave"}}"#,
        ] {
            assert!(serde_json::from_str::<ClientEnvelope>(text).is_err(), "{text}");
        }
    }

    #[test]
    fn attention_result_is_flat() {
        let msg = ServerMessage::AttentionResult {
            outcome: AttentionVerdict::Retry,
            attempts_left: 3,
        };
        let text = serde_json::to_string(&msg).unwrap();
        assert_eq!(text, r#"{"type":"attention_result","outcome":"retry","attempts_left":3}"#);
    }
}
