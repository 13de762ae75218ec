//! Experiment protocol: how a trial is sampled and reduced, how raw cursor
//! input becomes a game action, attention checks, the order of trials in a
//! session, and the per-sample log.

pub mod attention;
pub mod log;
pub mod plan;
pub mod screen;
pub mod trial;

pub use attention::{AttentionCheckState, AttentionOutcome};
pub use log::{LogRow, SessionLog};
pub use plan::{session_plan, CheckSlot, PlannedTrial};
pub use screen::{apply_mirror, ScreenMap, Sign, SCREEN_EXTENT, TRANSLATION_OFFSET};
pub use trial::{
    reduce_by_time, reduce_final_window, run_trial, InputSource, Reduced, Sample, Tick, TrialKind,
    TrialRecord, TrialSpec, TrialTiming,
};
