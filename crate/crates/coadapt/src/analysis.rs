//! Cross-session statistics and simulation-vs-experiment comparison, read
//! from iterate tables.

use std::io::Write;
use std::path::{Path, PathBuf};

use coadapt_core::stats::{summarize, IterationSummary, BOX_PERCENTILES, QUARTILES};
use coadapt_core::{Dims, Estimate, QuadraticCost};

use crate::error::{Error, Result};
use crate::logfile::{fmt_f64, load_iterates};

pub const ITERATES_SUFFIX: &str = "iterates.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct SessionSet {
    pub dims: Dims,
    pub files: Vec<PathBuf>,
    pub trajectories: Vec<Vec<Estimate>>,
}

/// Loads every `*iterates.csv` in `dir`, in file-name order. Unreadable or
/// shorter-than-longest tables are skipped with a warning.
pub fn load_dir(dir: &Path) -> Result<SessionSet> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(Error::io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(ITERATES_SUFFIX)))
        .collect();
    paths.sort();
    let mut loaded = Vec::new();
    for path in paths {
        match load_iterates(&path) {
            Ok((dims, t)) if !t.is_empty() => loaded.push((path, dims, t)),
            Ok(_) => log::warn!("{}: no iterations, skipped", path.display()),
            Err(e) => log::warn!("{}: {e}, skipped", path.display()),
        }
    }
    let Some(dims) = loaded.first().map(|l| l.1) else {
        return Err(Error::Usage(format!("no iterate tables in {}", dir.display())));
    };
    if let Some(other) = loaded.iter().find(|l| l.1 != dims) {
        return Err(Error::Usage(format!(
            "{} is {}, expected {dims}",
            other.0.display(),
            other.1
        )));
    }
    let len = loaded.iter().map(|l| l.2.len()).max().unwrap_or(0);
    let mut set = SessionSet {
        dims,
        files: Vec::new(),
        trajectories: Vec::new(),
    };
    for (path, _, t) in loaded {
        if t.len() < len {
            log::warn!("{}: partial ({} of {len} iterates), skipped", path.display(), t.len());
            continue;
        }
        set.files.push(path);
        set.trajectories.push(t);
    }
    Ok(set)
}

pub fn iteration_stats(set: &SessionSet) -> Result<Vec<IterationSummary>> {
    Ok(summarize(&set.trajectories, &QuadraticCost::origin(set.dims))?)
}

fn pct_label(p: f64) -> String {
    format!("p{}", p as u32)
}

fn write_csv(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(Error::io(path))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::Log(e.into());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(Error::io(path))?;
    Ok(())
}

fn floats(xs: &[f64]) -> impl Iterator<Item = String> + '_ {
    xs.iter().map(|x| fmt_f64(*x))
}

pub const ERRORS_FILE: &str = "l1_errors.csv";
pub const MEDIANS_FILE: &str = "median_estimates.csv";
pub const COST_FILE: &str = "cost_quartiles.csv";

/// Writes the three tables and returns their paths.
pub fn write_stats(stats: &[IterationSummary], dims: Dims, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(Error::io(out))?;

    let mut header = vec!["k".to_owned(), "sessions".to_owned()];
    for prefix in ["h_error", "m_error", "total_error"] {
        header.extend(BOX_PERCENTILES.iter().map(|p| format!("{prefix}_{}", pct_label(*p))));
    }
    let errors = out.join(ERRORS_FILE);
    write_csv(
        &errors,
        header,
        stats.iter().map(|s| {
            let mut r = vec![s.k.to_string(), s.sessions.to_string()];
            r.extend(floats(&s.h_error).chain(floats(&s.m_error)).chain(floats(&s.total_error)));
            r
        }),
    )?;

    let mut header = vec!["k".to_owned()];
    header.extend((1..=dims.human()).map(|i| format!("hhat_{i}")));
    header.extend((1..=dims.machine()).map(|i| format!("mhat_{i}")));
    let medians = out.join(MEDIANS_FILE);
    write_csv(
        &medians,
        header,
        stats.iter().map(|s| {
            let mut r = vec![s.k.to_string()];
            r.extend(floats(&s.median_h_hat).chain(floats(&s.median_m_hat)));
            r
        }),
    )?;

    let mut header = vec!["k".to_owned()];
    header.extend(QUARTILES.iter().map(|p| format!("cost_{}", pct_label(*p))));
    let cost = out.join(COST_FILE);
    write_csv(
        &cost,
        header,
        stats.iter().map(|s| {
            let mut r = vec![s.k.to_string()];
            r.extend(floats(&s.cost_quartiles));
            r
        }),
    )?;
    Ok(vec![errors, medians, cost])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub k: usize,
    pub sim: Vec<f64>,
    pub exp: Vec<f64>,
    /// Largest absolute difference between the two median estimates.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub dims: Dims,
    pub rows: Vec<ComparisonRow>,
    pub max_gap: f64,
}

fn median_estimate(s: &IterationSummary) -> Vec<f64> {
    s.median_h_hat.iter().chain(&s.median_m_hat).copied().collect()
}

/// Joins median estimates on the iteration index.
pub fn compare(dims: Dims, sim: &[IterationSummary], exp: &[IterationSummary]) -> Comparison {
    let rows: Vec<ComparisonRow> = sim
        .iter()
        .filter_map(|s| {
            let e = exp.iter().find(|e| e.k == s.k)?;
            let (a, b) = (median_estimate(s), median_estimate(e));
            let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            Some(ComparisonRow {
                k: s.k,
                sim: a,
                exp: b,
                gap,
            })
        })
        .collect();
    let max_gap = rows.iter().map(|r| r.gap).fold(0.0, f64::max);
    Comparison { dims, rows, max_gap }
}

pub fn compare_dirs(sim_dir: &Path, exp_dir: &Path) -> Result<Comparison> {
    let sim = load_dir(sim_dir)?;
    let exp = load_dir(exp_dir)?;
    if sim.dims != exp.dims {
        return Err(Error::Usage(format!("cannot compare {} with {}", sim.dims, exp.dims)));
    }
    Ok(compare(sim.dims, &iteration_stats(&sim)?, &iteration_stats(&exp)?))
}

pub fn write_comparison(c: &Comparison, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let names: Vec<String> = (1..=c.dims.human())
        .map(|i| format!("hhat_{i}"))
        .chain((1..=c.dims.machine()).map(|i| format!("mhat_{i}")))
        .collect();
    let mut header = vec!["k".to_owned()];
    for n in &names {
        header.push(format!("sim_{n}"));
        header.push(format!("exp_{n}"));
    }
    header.push("gap".to_owned());
    write_csv(
        path,
        header,
        c.rows.iter().map(|r| {
            let mut out = vec![r.k.to_string()];
            for (a, b) in r.sim.iter().zip(&r.exp) {
                out.push(fmt_f64(*a));
                out.push(fmt_f64(*b));
            }
            out.push(fmt_f64(r.gap));
            out
        }),
    )
}

/// One line per iteration: `k`, median total error, and the error quartiles.
pub fn print_summary<W: Write>(stats: &[IterationSummary], mut out: W) -> std::io::Result<()> {
    writeln!(out, "k\tsessions\ttotal_p25\ttotal_p50\ttotal_p75")?;
    for s in stats {
        writeln!(
            out,
            "{}\t{}\t{:.3e}\t{:.3e}\t{:.3e}",
            s.k, s.sessions, s.total_error[1], s.total_error[2], s.total_error[3]
        )?;
    }
    Ok(())
}
