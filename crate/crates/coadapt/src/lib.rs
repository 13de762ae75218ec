//! Session service, file formats and batch tools around `coadapt-core`.

// `!(x > 0.0)` is how parameter checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod client;
pub mod config;
pub mod error;
pub mod logfile;
pub mod server;
pub mod service;
pub mod simulate;
pub mod wire;

pub use error::{Error, Result};
