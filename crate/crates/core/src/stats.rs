//! Convergence statistics across sessions.
//!
//! Percentiles interpolate linearly between the two closest ranks: for sorted
//! `x[0..n]` and `p` in `[0, 100]`, with `pos = (n − 1) p / 100`,
//! `P(p) = x[⌊pos⌋] + (pos − ⌊pos⌋) (x[⌊pos⌋ + 1] − x[⌊pos⌋])`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::game::QuadraticCost;
use crate::learner::Estimate;

/// Box-and-whisker percentiles.
pub const BOX_PERCENTILES: [f64; 5] = [5.0, 25.0, 50.0, 75.0, 95.0];
pub const QUARTILES: [f64; 3] = [25.0, 50.0, 75.0];

fn order_stat(scratch: &mut [f64], i: usize) -> f64 {
    *scratch.select_nth_unstable_by(i, f64::total_cmp).1
}

pub fn percentiles(values: &[f64], ps: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("percentile of an empty set"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("percentile input"));
    }
    let mut scratch = values.to_vec();
    let n = values.len();
    ps.iter()
        .map(|&p| {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::InvalidParameter("percentile must lie in [0, 100]"));
            }
            let pos = (n - 1) as f64 * p / 100.0;
            let lo = libm::floor(pos) as usize;
            let frac = pos - lo as f64;
            let a = order_stat(&mut scratch, lo);
            if frac == 0.0 || lo + 1 >= n {
                return Ok(a);
            }
            let b = order_stat(&mut scratch, lo + 1);
            Ok(a + frac * (b - a))
        })
        .collect()
}

pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    Ok(percentiles(values, &[p])?[0])
}

pub fn median(values: &[f64]) -> Result<f64> {
    percentile(values, 50.0)
}

/// `Σ |a_i − b_i|`.
pub fn l1_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| libm::fabs(x - y)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationErrors {
    pub h_error: f64,
    pub m_error: f64,
    pub cost: f64,
}

impl IterationErrors {
    pub fn total(&self) -> f64 {
        self.h_error + self.m_error
    }
}

pub fn iteration_errors(estimate: &Estimate, cost: &QuadraticCost) -> Result<IterationErrors> {
    Ok(IterationErrors {
        h_error: l1_error(&estimate.h_hat, cost.human_optimum()),
        m_error: l1_error(&estimate.m_hat, cost.machine_optimum()),
        cost: cost.evaluate(&estimate.h_hat, &estimate.m_hat)?,
    })
}

/// Cross-session summary of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationSummary {
    pub k: usize,
    pub sessions: usize,
    /// At [`BOX_PERCENTILES`].
    pub h_error: Vec<f64>,
    pub m_error: Vec<f64>,
    pub total_error: Vec<f64>,
    pub median_h_hat: Vec<f64>,
    pub median_m_hat: Vec<f64>,
    /// Cost at the estimate, at [`QUARTILES`].
    pub cost_quartiles: Vec<f64>,
}

/// Summarizes estimate trajectories of equal length, one per session.
pub fn summarize(trajectories: &[Vec<Estimate>], cost: &QuadraticCost) -> Result<Vec<IterationSummary>> {
    let Some(first) = trajectories.first() else {
        return Err(Error::InvalidParameter("no trajectories to summarize"));
    };
    let len = first.len();
    if let Some(bad) = trajectories.iter().find(|t| t.len() != len) {
        return Err(Error::Shape {
            what: "trajectory length",
            expected: len,
            found: bad.len(),
        });
    }
    let dims = cost.dims();
    (0..len)
        .map(|k| {
            let at_k: Vec<&Estimate> = trajectories.iter().map(|t| &t[k]).collect();
            let errs = at_k
                .iter()
                .map(|e| {
                    e.check(dims)?;
                    iteration_errors(e, cost)
                })
                .collect::<Result<Vec<_>>>()?;
            let column = |f: &dyn Fn(&IterationErrors) -> f64| errs.iter().map(f).collect::<Vec<f64>>();
            let comp_median = |pick: &dyn Fn(&Estimate) -> &[f64], width: usize| -> Result<Vec<f64>> {
                (0..width)
                    .map(|i| median(&at_k.iter().map(|e| pick(e)[i]).collect::<Vec<_>>()))
                    .collect()
            };
            Ok(IterationSummary {
                k,
                sessions: trajectories.len(),
                h_error: percentiles(&column(&|e| e.h_error), &BOX_PERCENTILES)?,
                m_error: percentiles(&column(&|e| e.m_error), &BOX_PERCENTILES)?,
                total_error: percentiles(&column(&|e| e.total()), &BOX_PERCENTILES)?,
                median_h_hat: comp_median(&|e| &e.h_hat, dims.human())?,
                median_m_hat: comp_median(&|e| &e.m_hat, dims.machine())?,
                cost_quartiles: percentiles(&column(&|e| e.cost), &QUARTILES)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Dims;
    use alloc::vec;

    #[test]
    fn small_cases() {
        assert_eq!(percentile(&[3.0], 95.0).unwrap(), 3.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 25.0).unwrap(), 2.0);
        assert!((percentile(&[10.0, 0.0], 5.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(percentile(&[1.0, 2.0], 100.0).unwrap(), 2.0);
        assert!(percentile(&[], 50.0).is_err());
        assert!(percentile(&[1.0, f64::NAN], 50.0).is_err());
        assert!(percentile(&[1.0], 101.0).is_err());
    }

    #[test]
    fn errors_are_additive() {
        let cost = QuadraticCost::origin(Dims::new(2, 1).unwrap());
        let e = Estimate {
            h_hat: vec![0.1, -0.2],
            m_hat: vec![0.3],
        };
        let err = iteration_errors(&e, &cost).unwrap();
        assert!((err.h_error - 0.3).abs() < 1e-15);
        assert!((err.m_error - 0.3).abs() < 1e-15);
        assert!((err.total() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn single_session_summary_is_that_session() {
        let cost = QuadraticCost::origin(Dims::new(1, 1).unwrap());
        let traj = vec![vec![
            Estimate {
                h_hat: vec![0.5],
                m_hat: vec![-0.25],
            },
            Estimate {
                h_hat: vec![0.0],
                m_hat: vec![0.125],
            },
        ]];
        let s = summarize(&traj, &cost).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s[0].total_error.iter().all(|v| *v == 0.75));
        assert!(s[1].cost_quartiles.iter().all(|v| *v == 0.5 * 0.125 * 0.125));
        assert_eq!(s[1].median_m_hat, vec![0.125]);
    }

    #[test]
    fn ragged_trajectories_rejected() {
        let cost = QuadraticCost::origin(Dims::new(1, 1).unwrap());
        let e = Estimate::zeros(cost.dims());
        assert!(summarize(&[vec![e.clone()], vec![e.clone(), e]], &cost).is_err());
        assert!(summarize(&[], &cost).is_err());
    }
}
