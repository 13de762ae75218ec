//! Core of the co-adaptation game.
//!
//! A machine plays an affine policy `m = L (h - h_hat) + m_hat` against a human
//! who minimizes a shared quadratic cost that only the human knows. By probing
//! the human with perturbed gains and watching the responses, the machine moves
//! its estimate `(h_hat, m_hat)` onto the cost minimum.
//!
//! Everything here is pure computation over `alloc` collections; file formats,
//! the session service and the command line live in the `coadapt` crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is how parameter checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod closed_loop;
pub mod error;
pub mod game;
pub mod human;
pub mod learner;
pub mod linalg;
pub mod protocol;
pub mod session;
pub mod stats;

pub use closed_loop::{ClosedLoopSystem, StabilityReport};
pub use error::{Error, Result};
pub use game::{AffinePolicy, Dims, QuadraticCost};
pub use human::HumanModel;
pub use learner::{Estimate, LearnerConfig, LearnerState, PerturbationSchedule, UpdateMode};
pub use linalg::Matrix;
pub use session::{run_simulated_session, SimulatedSession, TrialOptions};
