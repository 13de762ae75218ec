#[cfg(feature = "serde")]
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::game::{AffinePolicy, Dims, QuadraticCost};
use crate::protocol::screen::ScreenMap;

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 60.0;
pub const DEFAULT_REDUCE_WINDOW_SECONDS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialTiming {
    pub duration_seconds: f64,
    pub sample_rate_hz: f64,
    pub reduce_window_seconds: f64,
}

impl TrialTiming {
    /// 10 s trials with one human axis, 25 s with two or more; 60 Hz; 5 s window.
    pub fn for_dims(dims: Dims) -> Self {
        Self {
            duration_seconds: if dims.human() == 1 { 10.0 } else { 25.0 },
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            reduce_window_seconds: DEFAULT_REDUCE_WINDOW_SECONDS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::InvalidParameter("sample rate must be positive"));
        }
        if !(self.reduce_window_seconds > 0.0) {
            return Err(Error::InvalidParameter("reduce window must be positive"));
        }
        if !(self.duration_seconds >= self.reduce_window_seconds && self.duration_seconds.is_finite()) {
            return Err(Error::InvalidParameter("trial must be at least as long as its reduce window"));
        }
        if self.window_samples() == 0 {
            return Err(Error::InvalidParameter("reduce window holds no samples"));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        libm::round(self.duration_seconds * self.sample_rate_hz) as usize
    }

    pub fn window_samples(&self) -> usize {
        libm::round(self.reduce_window_seconds * self.sample_rate_hz) as usize
    }

    /// Nominal timestamp of sample `i`.
    pub fn time_of(&self, i: usize) -> f64 {
        i as f64 / self.sample_rate_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrialKind {
    Unperturbed,
    /// Index into the perturbation schedule.
    Perturbation(usize),
    AttentionCheck,
}

impl fmt::Display for TrialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrialKind::Unperturbed => f.write_str("unperturbed"),
            TrialKind::Perturbation(p) => write!(f, "perturbation_{p}"),
            TrialKind::AttentionCheck => f.write_str("attention_check"),
        }
    }
}

impl FromStr for TrialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unperturbed" => Ok(TrialKind::Unperturbed),
            "attention_check" => Ok(TrialKind::AttentionCheck),
            _ => s
                .strip_prefix("perturbation_")
                .and_then(|p| p.parse().ok())
                .map(TrialKind::Perturbation)
                .ok_or(Error::InvalidParameter("unknown trial kind")),
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for TrialKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for TrialKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub policy: AffinePolicy,
    pub timing: TrialTiming,
    pub screen: ScreenMap,
    pub kind: TrialKind,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sample {
    pub t: f64,
    pub h_raw: Vec<f64>,
    pub h: Vec<f64>,
    pub m: Vec<f64>,
    pub cost: f64,
}

/// Mean actions over the final window of a trial.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Reduced {
    pub h: Vec<f64>,
    pub m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub kind: TrialKind,
    pub samples: Vec<Sample>,
    pub reduced: Reduced,
    /// Samples whose cursor lay off screen and was clamped.
    pub clamped_samples: usize,
}

/// What an input source sees when asked for the next cursor position.
pub struct Tick<'a> {
    pub index: usize,
    pub t: f64,
    pub spec: &'a TrialSpec,
}

/// One raw cursor sample per tick; `None` means the stream ended.
pub trait InputSource {
    fn next_cursor(&mut self, tick: &Tick<'_>) -> Option<Vec<f64>>;
}

impl<F> InputSource for F
where
    F: FnMut(&Tick<'_>) -> Option<Vec<f64>>,
{
    fn next_cursor(&mut self, tick: &Tick<'_>) -> Option<Vec<f64>> {
        self(tick)
    }
}

/// Runs one trial: per tick, map the cursor to a game action, apply the
/// trial's policy, evaluate the cost; then reduce the final window.
pub fn run_trial<S: InputSource + ?Sized>(
    cost: &QuadraticCost,
    spec: &TrialSpec,
    source: &mut S,
) -> Result<TrialRecord> {
    spec.timing.validate()?;
    let n = spec.timing.sample_count();
    let mut samples = Vec::with_capacity(n);
    let mut clamped_samples = 0;
    for index in 0..n {
        let t = spec.timing.time_of(index);
        let tick = Tick { index, t, spec };
        let Some(h_raw) = source.next_cursor(&tick) else {
            return Err(Error::TrialAborted {
                expected: n,
                received: index,
            });
        };
        let (h, clamped) = spec.screen.screen_to_game(&h_raw)?;
        clamped_samples += usize::from(clamped);
        let m = spec.policy.machine_action(&h)?;
        let c = cost.evaluate(&h, &m)?;
        samples.push(Sample {
            t,
            h_raw,
            h,
            m,
            cost: c,
        });
    }
    let reduced = reduce_final_window(&samples, spec.timing.window_samples())?;
    Ok(TrialRecord {
        kind: spec.kind,
        samples,
        reduced,
        clamped_samples,
    })
}

fn mean_of<'a>(rows: impl Iterator<Item = &'a [f64]>, width: usize) -> Vec<f64> {
    let mut acc = alloc::vec![0.0; width];
    let mut count = 0usize;
    for r in rows {
        for (a, x) in acc.iter_mut().zip(r) {
            *a += x;
        }
        count += 1;
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    acc
}

/// Means of `h` and `m` over the last `window` samples.
pub fn reduce_final_window(samples: &[Sample], window: usize) -> Result<Reduced> {
    if window == 0 || samples.len() < window {
        return Err(Error::InvalidParameter("not enough samples for the reduce window"));
    }
    Ok(reduce(&samples[samples.len() - window..]))
}

/// Means over samples stamped at or after `window_start` seconds; `None` if
/// no sample falls in the window.
pub fn reduce_by_time(samples: &[Sample], window_start: f64) -> Option<Reduced> {
    let first = samples.iter().position(|s| s.t >= window_start)?;
    Some(reduce(&samples[first..]))
}

fn reduce(window: &[Sample]) -> Reduced {
    let (dh, dm) = (window[0].h.len(), window[0].m.len());
    Reduced {
        h: mean_of(window.iter().map(|s| s.h.as_slice()), dh),
        m: mean_of(window.iter().map(|s| s.m.as_slice()), dm),
    }
}
