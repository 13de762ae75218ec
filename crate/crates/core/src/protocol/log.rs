//! Per-sample session log. Column order is fixed:
//! `iteration,trial_index,trial_kind,sample,t,h_1..h_dh,m_1..m_dm,cost,
//! hhat_1..hhat_dh,mhat_1..mhat_dm,cost_at_estimate`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{check_len, Result};
use crate::game::{Dims, QuadraticCost};
use crate::learner::Estimate;
use crate::protocol::trial::{TrialKind, TrialRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    /// Learner iteration the trial belongs to; for attention checks, the
    /// number of iterations completed so far.
    pub iteration: usize,
    /// Position of the trial within the session, counting every trial played.
    pub trial_index: usize,
    pub trial_kind: TrialKind,
    pub sample: usize,
    pub t: f64,
    pub h: Vec<f64>,
    pub m: Vec<f64>,
    pub cost: f64,
    pub h_hat: Vec<f64>,
    pub m_hat: Vec<f64>,
    pub cost_at_estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    dims: Dims,
    rows: Vec<LogRow>,
}

impl SessionLog {
    pub fn new(dims: Dims) -> Self {
        Self {
            dims,
            rows: Vec::new(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn rows(&self) -> &[LogRow] {
        &self.rows
    }

    pub fn push(&mut self, row: LogRow) -> Result<()> {
        check_len("logged human action", &row.h, self.dims.human())?;
        check_len("logged machine action", &row.m, self.dims.machine())?;
        check_len("logged human estimate", &row.h_hat, self.dims.human())?;
        check_len("logged machine estimate", &row.m_hat, self.dims.machine())?;
        self.rows.push(row);
        Ok(())
    }

    /// Appends every sample of `record`, stamped with the estimate the
    /// machine held during the trial.
    pub fn push_trial(
        &mut self,
        iteration: usize,
        trial_index: usize,
        record: &TrialRecord,
        estimate: &Estimate,
        cost: &QuadraticCost,
    ) -> Result<()> {
        let cost_at_estimate = cost.evaluate(&estimate.h_hat, &estimate.m_hat)?;
        for (i, s) in record.samples.iter().enumerate() {
            self.push(LogRow {
                iteration,
                trial_index,
                trial_kind: record.kind,
                sample: i,
                t: s.t,
                h: s.h.clone(),
                m: s.m.clone(),
                cost: s.cost,
                h_hat: estimate.h_hat.clone(),
                m_hat: estimate.m_hat.clone(),
                cost_at_estimate,
            })?;
        }
        Ok(())
    }

    /// Distinct trial indices, in log order.
    pub fn trial_indices(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r.trial_index) {
                out.push(r.trial_index);
            }
        }
        out
    }
}

pub fn header(dims: Dims) -> Vec<String> {
    let mut cols: Vec<String> = ["iteration", "trial_index", "trial_kind", "sample", "t"]
        .iter()
        .map(|s| String::from(*s))
        .collect();
    cols.extend((1..=dims.human()).map(|i| format!("h_{i}")));
    cols.extend((1..=dims.machine()).map(|i| format!("m_{i}")));
    cols.push("cost".into());
    cols.extend((1..=dims.human()).map(|i| format!("hhat_{i}")));
    cols.extend((1..=dims.machine()).map(|i| format!("mhat_{i}")));
    cols.push("cost_at_estimate".into());
    cols
}

/// Recovers the dimensions from a header produced by [`header`].
pub fn dims_from_header<S: AsRef<str>>(cols: &[S]) -> Option<Dims> {
    let count = |prefix: &str| cols.iter().filter(|c| c.as_ref().starts_with(prefix)).count();
    let dims = Dims::new(count("h_"), count("m_")).ok()?;
    let expected = header(dims);
    (expected.len() == cols.len() && expected.iter().zip(cols).all(|(a, b)| a == b.as_ref()))
        .then_some(dims)
}
