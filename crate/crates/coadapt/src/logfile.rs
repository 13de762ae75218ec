//! CSV files: the per-sample session log and the per-iteration iterate table.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back yields bit-identical values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use coadapt_core::protocol::log::{dims_from_header, header};
use coadapt_core::protocol::{LogRow, SessionLog, TrialKind};
use coadapt_core::{Dims, Estimate, LearnerState, QuadraticCost};

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] coadapt_core::Error),
}

fn parse_error(line: u64, message: impl Into<String>) -> LogError {
    LogError::Parse {
        line,
        message: message.into(),
    }
}

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn iterate_header(dims: Dims) -> Vec<String> {
    let mut cols = vec!["k".to_owned()];
    cols.extend((1..=dims.human()).map(|i| format!("hhat_{i}")));
    cols.extend((1..=dims.machine()).map(|i| format!("mhat_{i}")));
    cols.push("cost_at_estimate".to_owned());
    cols
}

fn iterate_dims(cols: &[String]) -> Option<Dims> {
    let count = |prefix: &str| cols.iter().filter(|c| c.starts_with(prefix)).count();
    let dims = Dims::new(count("hhat_"), count("mhat_")).ok()?;
    (iterate_header(dims) == cols).then_some(dims)
}

pub fn write_log<W: Write>(log: &SessionLog, out: W) -> Result<(), LogError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(log.dims()))?;
    let mut rec: Vec<String> = Vec::new();
    for r in log.rows() {
        rec.clear();
        rec.extend([
            r.iteration.to_string(),
            r.trial_index.to_string(),
            r.trial_kind.to_string(),
            r.sample.to_string(),
            fmt_f64(r.t),
        ]);
        rec.extend(r.h.iter().chain(&r.m).map(|x| fmt_f64(*x)));
        rec.push(fmt_f64(r.cost));
        rec.extend(r.h_hat.iter().chain(&r.m_hat).map(|x| fmt_f64(*x)));
        rec.push(fmt_f64(r.cost_at_estimate));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

struct Fields<'a> {
    rec: &'a csv::StringRecord,
    line: u64,
    next: usize,
}

impl Fields<'_> {
    fn text(&mut self, name: &str) -> Result<&str, LogError> {
        let s = self
            .rec
            .get(self.next)
            .ok_or_else(|| parse_error(self.line, format!("missing field {name}")))?;
        self.next += 1;
        Ok(s)
    }

    fn parse<T: std::str::FromStr>(&mut self, name: &str) -> Result<T, LogError> {
        let line = self.line;
        let s = self.text(name)?;
        s.parse()
            .map_err(|_| parse_error(line, format!("field {name}: cannot parse {s:?}")))
    }

    fn floats(&mut self, name: &str, n: usize) -> Result<Vec<f64>, LogError> {
        (0..n).map(|_| self.parse(name)).collect()
    }
}

fn records<R: Read>(input: R) -> csv::StringRecordsIntoIter<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input)
        .into_records()
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

pub fn read_log<R: Read>(input: R) -> Result<SessionLog, LogError> {
    let mut recs = records(input);
    let head = recs.next().ok_or_else(|| parse_error(1, "empty file, expected a header"))??;
    let cols: Vec<&str> = head.iter().collect();
    let dims = dims_from_header(&cols).ok_or_else(|| parse_error(1, "malformed session log header"))?;
    let width = cols.len();
    let mut log = SessionLog::new(dims);
    for rec in recs {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != width {
            return Err(parse_error(line, format!("expected {width} fields, found {}", rec.len())));
        }
        let mut f = Fields { rec: &rec, line, next: 0 };
        let row = LogRow {
            iteration: f.parse("iteration")?,
            trial_index: f.parse("trial_index")?,
            trial_kind: f.parse::<TrialKind>("trial_kind")?,
            sample: f.parse("sample")?,
            t: f.parse("t")?,
            h: f.floats("h", dims.human())?,
            m: f.floats("m", dims.machine())?,
            cost: f.parse("cost")?,
            h_hat: f.floats("hhat", dims.human())?,
            m_hat: f.floats("mhat", dims.machine())?,
            cost_at_estimate: f.parse("cost_at_estimate")?,
        };
        log.push(row)?;
    }
    Ok(log)
}

/// One row per learner state, `k = 0..=K`.
pub fn write_iterates<W: Write>(history: &[LearnerState], cost: &QuadraticCost, out: W) -> Result<(), LogError> {
    let dims = cost.dims();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(iterate_header(dims))?;
    for st in history {
        st.estimate.check(dims)?;
        let mut rec = vec![st.k.to_string()];
        rec.extend(st.estimate.stacked().iter().map(|x| fmt_f64(*x)));
        rec.push(fmt_f64(cost.evaluate(&st.estimate.h_hat, &st.estimate.m_hat)?));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an iterate table. Rows must be numbered `0, 1, 2, ...`.
pub fn read_iterates<R: Read>(input: R) -> Result<(Dims, Vec<Estimate>), LogError> {
    let mut recs = records(input);
    let head = recs.next().ok_or_else(|| parse_error(1, "empty file, expected a header"))??;
    let cols: Vec<String> = head.iter().map(str::to_owned).collect();
    let dims = iterate_dims(&cols).ok_or_else(|| parse_error(1, "malformed iterate header"))?;
    let mut out = Vec::new();
    for rec in recs {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != cols.len() {
            return Err(parse_error(line, format!("expected {} fields, found {}", cols.len(), rec.len())));
        }
        let mut f = Fields { rec: &rec, line, next: 0 };
        let k: usize = f.parse("k")?;
        if k != out.len() {
            return Err(parse_error(line, format!("expected k = {}, found {k}", out.len())));
        }
        out.push(Estimate {
            h_hat: f.floats("hhat", dims.human())?,
            m_hat: f.floats("mhat", dims.machine())?,
        });
    }
    Ok((dims, out))
}

pub fn save_log(log: &SessionLog, path: &Path) -> crate::Result<()> {
    let file = File::create(path).map_err(crate::Error::io(path))?;
    Ok(write_log(log, BufWriter::new(file))?)
}

pub fn load_log(path: &Path) -> crate::Result<SessionLog> {
    let file = File::open(path).map_err(crate::Error::io(path))?;
    Ok(read_log(BufReader::new(file))?)
}

pub fn save_iterates(history: &[LearnerState], cost: &QuadraticCost, path: &Path) -> crate::Result<()> {
    let file = File::create(path).map_err(crate::Error::io(path))?;
    Ok(write_iterates(history, cost, BufWriter::new(file))?)
}

pub fn load_iterates(path: &Path) -> crate::Result<(Dims, Vec<Estimate>)> {
    let file = File::open(path).map_err(crate::Error::io(path))?;
    Ok(read_iterates(BufReader::new(file))?)
}
